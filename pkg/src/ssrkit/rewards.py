"""Verifiable reward scoring: prompt matching, description similarity, the
candidate filter, group advantages, Best-of-N selection, and removal checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .commands import InvalidOutput, parse_candidate_object
from .errors import (AllInvalid, DimensionMismatch, EmptyPrompt, IllegalEdit,
                     TooFewSamples)
from .scene import Scene, SceneObject, add_object
from .voxel import MeshResolver, VoxelConfig, delta_vbl

_PUNCT = ".,;:!?\"'()"


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace tokens with leading/trailing punctuation stripped."""
    tokens = []
    for word in text.lower().split():
        word = word.strip(_PUNCT)
        if word:
            tokens.append(word)
    return tokens


def pms(prompt: str, desc: str) -> float:
    """Fraction of prompt tokens present in the description's token set."""
    prompt_tokens = tokenize(prompt)
    if not prompt_tokens:
        raise EmptyPrompt("prompt has no tokens after tokenization")
    desc_tokens = set(tokenize(desc))
    return sum(1 for t in prompt_tokens if t in desc_tokens) / len(prompt_tokens)


def dss(embedding_a, embedding_b) -> float:
    """Cosine similarity of two unit-norm description embeddings."""
    a = np.asarray(embedding_a, dtype=float)
    b = np.asarray(embedding_b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"embedding shapes differ: {a.shape} vs {b.shape}")
    return float(a @ b)


@dataclass(frozen=True)
class RewardConfig:
    pms_min: float = 0.85
    dss_min: float = 0.9
    vbl_max: float = 1e-5
    size_l2_max: float = 0.2
    invalid_reward: float = -1.0
    pass_reward: float = 1.0


@dataclass(frozen=True)
class RewardOutcome:
    reward: float
    status: str  # invalid_output | pass | fail_filter_masked
    components: dict = field(default_factory=dict)

    @property
    def masked(self) -> bool:
        # masked candidates keep a numeric 0 so group sizes stay constant
        return self.status == "fail_filter_masked"

    def to_json_dict(self) -> dict:
        return {"reward": self.reward, "status": self.status,
                "components": dict(self.components)}


@dataclass(frozen=True)
class RewardContext:
    scene: Scene
    prompt: str
    gt_object: SceneObject
    embeddings: Optional[Mapping[str, Sequence[float]]] = None
    meshes: Optional[MeshResolver] = None
    cfg: RewardConfig = RewardConfig()
    vox: VoxelConfig = VoxelConfig()


def _desc_similarity(ctx: RewardContext, predicted_desc: str) -> float:
    if ctx.embeddings is not None:
        try:
            return dss(ctx.embeddings[ctx.gt_object.desc],
                       ctx.embeddings[predicted_desc])
        except KeyError:
            pass
    # no embedding provider: exact description match as a degenerate fallback
    return 1.0 if predicted_desc == ctx.gt_object.desc else 0.0


def score_candidate(candidate_text: str, ctx: RewardContext) -> RewardOutcome:
    """Apply the verifiable-reward filter to one candidate insertion.

    Malformed candidates get the invalid penalty; well-formed candidates that
    miss any filter are masked rather than penalized.
    """
    candidate = parse_candidate_object(candidate_text)
    if isinstance(candidate, InvalidOutput):
        return RewardOutcome(ctx.cfg.invalid_reward, "invalid_output",
                             {"reason": candidate.reason})

    pms_value = pms(ctx.prompt, candidate.desc)
    dss_value = _desc_similarity(ctx, candidate.desc)
    vbl_value = delta_vbl(ctx.scene, add_object(ctx.scene, candidate),
                          ctx.meshes, ctx.vox)
    size_l2 = math.dist(ctx.gt_object.size.as_list(), candidate.size.as_list())
    components = {"pms": pms_value, "dss": dss_value,
                  "vbl_norm": vbl_value, "size_l2": size_l2}

    passes = (pms_value >= ctx.cfg.pms_min
              and dss_value >= ctx.cfg.dss_min
              and vbl_value < ctx.cfg.vbl_max
              and size_l2 < ctx.cfg.size_l2_max)
    if passes:
        return RewardOutcome(ctx.cfg.pass_reward, "pass", components)
    return RewardOutcome(0.0, "fail_filter_masked", components)


def group_advantage(rewards: Sequence[float]) -> list[float]:
    """Per-sample (r - mean) / std with population std; all zeros when the
    group is degenerate."""
    if len(rewards) < 2:
        raise TooFewSamples(f"need at least 2 rewards, got {len(rewards)}")
    arr = np.asarray(rewards, dtype=float)
    std = float(arr.std())
    if std < 1e-12:
        return [0.0] * len(arr)
    return ((arr - arr.mean()) / std).tolist()


def best_of_n(candidates: Sequence[RewardOutcome]) -> int:
    """Among valid candidates, keep those attaining max PMS, then pick the
    lowest delta violation (ties by lowest index)."""
    valid = [(i, c) for i, c in enumerate(candidates) if c.status != "invalid_output"]
    if not valid:
        raise AllInvalid("every candidate is invalid")
    best_pms = max(c.components["pms"] for _, c in valid)
    finalists = [(i, c) for i, c in valid if c.components["pms"] == best_pms]
    return min(finalists, key=lambda pair: (pair[1].components["vbl_norm"], pair[0]))[0]


PromptMatcher = Callable[[str, Sequence[SceneObject]], set[int]]


def default_matcher(prompt: str, objects: Sequence[SceneObject]) -> set[int]:
    """Indices expected to be removed: all objects sharing the identity of the
    best-PMS object, requiring PMS >= 0.5 for a match at all.

    Identity is the asset jid when present, else the description text, so
    duplicated assets are removed as a group.
    """
    scored = [(pms(prompt, obj.desc), i) for i, obj in enumerate(objects)]
    if not scored:
        return set()
    best_score, best_idx = max(scored, key=lambda pair: (pair[0], -pair[1]))
    if best_score < 0.5:
        return set()
    best = objects[best_idx]
    key = best.jid if best.jid is not None else best.desc
    return {i for i, obj in enumerate(objects)
            if (obj.jid if obj.jid is not None else obj.desc) == key}


def removal_accuracy(before: Scene, after: Scene, prompt: str,
                     matcher: PromptMatcher = default_matcher) -> bool:
    """True iff exactly the prompt-matched objects were removed, 1:1."""
    survivors = list(after.objects)
    removed: list[SceneObject] = []
    for obj in before.objects:
        if obj in survivors:
            survivors.remove(obj)
        else:
            removed.append(obj)
    if survivors:
        raise IllegalEdit("after contains an object not present in before")
    expected = [before.objects[i] for i in matcher(prompt, before.objects)]
    for obj in removed:
        if obj not in expected:
            return False
        expected.remove(obj)
    return not expected
