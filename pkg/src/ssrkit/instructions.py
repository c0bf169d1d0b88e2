"""Training-tuple generation: partial scene + object prompt + target object,
and the floor-area object-count prior used for density sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .boundary import polygon_area, polygon_from_scene
from .errors import MissingPromptBankEntry, SsrkitError
from .scene import Scene, SceneObject, serialize_ssr

Z_TYPES = ("Z0_zero_start", "Z1_full_scene", "Z2_random")
Z_WEIGHTS = (0.1, 0.1, 0.8)

PROMPTS_PER_OBJECT = 10


@dataclass(frozen=True)
class PromptBank:
    prompts: dict[str, list[str]]  # asset jid -> 10 prompt strings

    def __post_init__(self):
        for jid, plist in self.prompts.items():
            if len(plist) != PROMPTS_PER_OBJECT:
                raise SsrkitError(
                    f"prompt bank entry {jid!r} has {len(plist)} prompts, expected {PROMPTS_PER_OBJECT}")
            if any(not p for p in plist):
                raise SsrkitError(f"prompt bank entry {jid!r} contains an empty prompt")

    def for_object(self, obj: SceneObject) -> list[str]:
        jid = obj.jid
        if jid is None or jid not in self.prompts:
            raise MissingPromptBankEntry(jid or f"<no jid: {obj.desc[:30]}>")
        return self.prompts[jid]

    @staticmethod
    def load(path) -> "PromptBank":
        with open(path, "r", encoding="utf-8") as fh:
            return PromptBank(json.load(fh))


@dataclass(frozen=True)
class Instruction:
    partial_scene: Scene
    prompt: str
    gt_object: SceneObject
    z_type: str


def gen_instruction(scene: Scene, bank: PromptBank, seed) -> Instruction:
    """Draw one training tuple.

    A uniform object permutation is drawn first, then the instruction type
    from Cat(0.1, 0.1, 0.8): empty-room start, scene completion (one object
    held out), or a random-size partial scene. The prompt is uniform over the
    target object's bank entry.
    """
    n = len(scene.objects)
    if n < 1:
        raise SsrkitError("cannot build an instruction from an empty scene")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    z_idx = int(rng.choice(3, p=Z_WEIGHTS))
    if z_idx == 0:
        kept = 0
    elif z_idx == 1:
        kept = n - 1
    else:
        dropped = int(rng.integers(0, n))
        kept = n - dropped - 1  # target is the next object after the kept prefix
    gt = scene.objects[perm[kept]]
    partial = replace(scene, objects=tuple(scene.objects[perm[i]] for i in range(kept)))
    prompts = bank.for_object(gt)
    prompt = prompts[int(rng.integers(0, len(prompts)))]
    return Instruction(partial, prompt, gt, Z_TYPES[z_idx])


MODEL_INPUT_TEMPLATE = "<scenegraph>{scene}</scenegraph>\n<prompt>{prompt}</prompt>\n"


def render_model_input(instr: Instruction) -> str:
    """Stable text rendering of an instruction; the template is an artifact
    contract covered by a golden-file test."""
    return MODEL_INPUT_TEMPLATE.format(scene=serialize_ssr(instr.partial_scene),
                                       prompt=instr.prompt)


def instruction_to_json_dict(instr: Instruction) -> dict:
    return {
        "partial_scene": json.loads(serialize_ssr(instr.partial_scene)),
        "prompt": instr.prompt,
        "gt_object": json.loads(serialize_ssr(
            replace(instr.partial_scene, objects=(instr.gt_object,))))["objects"][0],
        "z_type": instr.z_type,
    }


class ObjectCountPrior:
    """Empirical object-count distribution conditioned on binned floor area."""

    def __init__(self, scenes: list[Scene], bins: int):
        if not scenes:
            raise SsrkitError("need at least one scene for the prior")
        if bins < 1:
            raise SsrkitError("bins must be positive")
        areas = np.array([polygon_area(polygon_from_scene(s)) for s in scenes])
        counts = np.array([len(s.objects) for s in scenes])
        lo, hi = float(areas.min()), float(areas.max())
        if hi - lo < 1e-12:
            bins = 1
            hi = lo + 1.0
        self.edges = np.linspace(lo, hi, bins + 1)
        self.bin_counts: list[np.ndarray] = []
        idx = np.clip(np.digitize(areas, self.edges[1:-1]), 0, bins - 1)
        for b in range(bins):
            self.bin_counts.append(np.sort(counts[idx == b]))

    def _bin_for(self, area: float) -> int:
        b = int(np.clip(np.digitize([area], self.edges[1:-1])[0], 0, len(self.bin_counts) - 1))
        if len(self.bin_counts[b]):
            return b
        # nearest non-empty bin
        candidates = [i for i, c in enumerate(self.bin_counts) if len(c)]
        return min(candidates, key=lambda i: abs(i - b))

    def counts_for_area(self, area: float) -> np.ndarray:
        return self.bin_counts[self._bin_for(area)]

    def sample(self, area: float, rng: np.random.Generator) -> int:
        counts = self.counts_for_area(area)
        return int(counts[int(rng.integers(0, len(counts)))])


def object_count_prior(scenes: list[Scene], bins: int) -> ObjectCountPrior:
    return ObjectCountPrior(scenes, bins)
