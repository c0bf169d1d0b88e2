"""Flat function surface over the ssrkit public API.

Inputs and outputs are restricted to str, float, int, and bool; anything
structured is JSON text. Library errors surface as ValueError so callers on
the far side of a boundary only ever deal with builtin exception types.
"""

from __future__ import annotations

import functools
import json

from ssrkit import (RewardConfig, RewardContext, SamplerConfig, SsrkitError,
                    compute_vbl, delta_vbl, dss, greedy_asset,
                    group_advantage, parse_candidate_object, parse_ssr, pms,
                    sample_asset, score_candidate)
from ssrkit.commands import InvalidOutput
from ssrkit.voxel import VoxelConfig


def _boundary(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SsrkitError as exc:
            raise ValueError(str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed JSON argument: {exc}") from exc
    return wrapper


def _parse_gt(gt_json: str):
    gt = parse_candidate_object(gt_json)
    if isinstance(gt, InvalidOutput):
        raise ValueError(f"ground-truth object is invalid: {gt.reason}")
    return gt


@_boundary
def bind_pms(prompt: str, desc: str) -> float:
    """Fraction of prompt tokens found in the description."""
    return float(pms(prompt, desc))


@_boundary
def bind_dss(embedding_a_json: str, embedding_b_json: str) -> float:
    """Cosine similarity of two unit embeddings given as JSON arrays."""
    return float(dss(json.loads(embedding_a_json), json.loads(embedding_b_json)))


@_boundary
def bind_compute_vbl(scene_json: str, voxel_size: float = 0.05) -> str:
    """Voxel violation report for a scene document, returned as JSON."""
    scene = parse_ssr(scene_json)
    report = compute_vbl(scene, cfg=VoxelConfig(voxel_size=voxel_size))
    return json.dumps(report.to_json_dict())


@_boundary
def bind_delta_vbl(before_json: str, after_json: str,
                   voxel_size: float = 0.05) -> float:
    """Change in normalized violation caused by one added object."""
    return float(delta_vbl(parse_ssr(before_json), parse_ssr(after_json),
                           cfg=VoxelConfig(voxel_size=voxel_size)))


@_boundary
def bind_score_candidate(candidate_json: str, scene_json: str, prompt: str,
                         gt_json: str, config_json: str = "{}") -> str:
    """Score one candidate insertion; the RewardOutcome crosses back as JSON.

    config_json may set pms_min, dss_min, vbl_max, size_l2_max, voxel_size,
    and an embeddings map keyed by description text.
    """
    config = json.loads(config_json)
    if not isinstance(config, dict):
        raise ValueError("config_json must encode a JSON object")
    voxel_size = float(config.pop("voxel_size", 0.05))
    embeddings = config.pop("embeddings", None)
    reward_keys = {"pms_min", "dss_min", "vbl_max", "size_l2_max",
                   "invalid_reward", "pass_reward"}
    unknown = set(config) - reward_keys
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    ctx = RewardContext(
        scene=parse_ssr(scene_json),
        prompt=prompt,
        gt_object=_parse_gt(gt_json),
        embeddings=embeddings,
        cfg=RewardConfig(**config),
        vox=VoxelConfig(voxel_size=voxel_size),
    )
    return json.dumps(score_candidate(candidate_json, ctx).to_json_dict())


@_boundary
def bind_group_advantage(rewards_json: str) -> str:
    """Group-normalized advantages for a JSON array of rewards."""
    rewards = json.loads(rewards_json)
    if not isinstance(rewards, list):
        raise ValueError("rewards_json must encode a JSON array")
    return json.dumps(group_advantage(rewards))


@_boundary
def bind_sample_asset(scores_json: str, config_json: str = "{}") -> str:
    """Draw one asset id from a JSON array of [jid, score] pairs."""
    scores = [(str(j), float(s)) for j, s in json.loads(scores_json)]
    config = json.loads(config_json)
    if not isinstance(config, dict):
        raise ValueError("config_json must encode a JSON object")
    return sample_asset(scores, SamplerConfig(**config))


@_boundary
def bind_greedy_asset(scores_json: str) -> str:
    """Highest-scoring asset id, ties broken lexicographically."""
    scores = [(str(j), float(s)) for j, s in json.loads(scores_json)]
    return greedy_asset(scores)
