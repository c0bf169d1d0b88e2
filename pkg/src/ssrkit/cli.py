"""Batch command-line surface.

Exit codes: 0 success, 1 validation/metric failure, 2 input error. Every run
writes a manifest (JSON) to stderr, or to --manifest when given; stdout is
deterministic for a fixed seed. SSRKIT_SEED serves as the global seed
fallback.
"""

from __future__ import annotations

import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from .assets import (SamplerConfig, greedy_asset, load_catalog,
                     load_query_embeddings, sample_asset, score_assets)
from .boundary import extract_corners, load_obj
from .errors import SsrkitError
from .instructions import (PromptBank, gen_instruction,
                           instruction_to_json_dict)
from .rewards import (RewardConfig, RewardContext, RewardOutcome, best_of_n,
                      group_advantage, pms, score_candidate)
from .scene import Scene, Vec3, augment, parse_ssr
from .voxel import VoxelConfig, compute_vbl, delta_vbl, validate_scene


def _emit_manifest(command: str, config: dict, inputs: list[str],
                   seed, started: float, manifest_path: str | None):
    manifest = {
        "command": command,
        "config": config,
        "inputs": inputs,
        "seed": seed,
        "tool_version": __version__,
        "wall_time_s": round(time.monotonic() - started, 6),
    }
    text = json.dumps(manifest)
    if manifest_path:
        Path(manifest_path).write_text(text + "\n", encoding="utf-8")
    else:
        click.echo(text, err=True)


def _env_seed(seed):
    if seed is not None:
        return seed
    env = os.environ.get("SSRKIT_SEED")
    return int(env) if env else None


def _load_scene(path) -> Scene:
    return parse_ssr(Path(path).read_text(encoding="utf-8"))


def _mesh_resolver(meshes_dir):
    """Resolve object meshes as {jid}.obj files in a directory; objects with
    no file fall back to their bounding box."""
    if meshes_dir is None:
        return None
    root = Path(meshes_dir)
    cache: dict[str, object] = {}

    def resolve(obj):
        jid = obj.sampled_asset_jid or obj.jid
        if jid is None:
            return None
        if jid not in cache:
            path = root / f"{jid}.obj"
            cache[jid] = load_obj(path) if path.exists() else None
        return cache[jid]

    return resolve


@click.group()
def main():
    """Scene toolkit: validate, score, and generate SSR scene data."""


@main.command("validate")
@click.argument("paths", nargs=-1, required=True,
                type=click.Path(exists=True))
@click.option("--voxel-size", default=0.05, show_default=True)
@click.option("--meshes", type=click.Path(exists=True, file_okay=False))
@click.option("--json", "as_json", is_flag=True, help="line-delimited JSON output")
@click.option("--jobs", default=1, show_default=True)
@click.option("--manifest", type=click.Path())
def cli_validate(paths, voxel_size, meshes, as_json, jobs, manifest):
    """Run the dataset validity filter over scene files or directories."""
    started = time.monotonic()
    files: list[Path] = []
    for p in paths:
        p = Path(p)
        files.extend(sorted(p.glob("*.json")) if p.is_dir() else [p])
    cfg = VoxelConfig(voxel_size=voxel_size)
    resolver = _mesh_resolver(meshes)

    def check(path: Path):
        try:
            return validate_scene(_load_scene(path), resolver, cfg), None
        except SsrkitError as exc:
            return None, str(exc)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(check, files))
    else:
        results = [check(f) for f in files]

    n_invalid = 0
    for path, (validity, error) in zip(files, results):
        if error is not None:
            n_invalid += 1
            record = {"scene": str(path), "is_valid": False, "reason": "bad_bounds",
                      "error": error}
        else:
            if not validity.is_valid:
                n_invalid += 1
            record = {"scene": str(path), "is_valid": validity.is_valid,
                      "reason": validity.reason}
            if validity.rescued_index is not None:
                record["rescued_index"] = validity.rescued_index
        if as_json:
            click.echo(json.dumps(record))
        else:
            suffix = (f" (rescued_index={validity.rescued_index})"
                      if validity and validity.rescued_index is not None else "")
            click.echo(f"{path}: {record['reason']}{suffix}")
    if n_invalid:
        click.echo(f"{n_invalid}/{len(files)} scenes invalid", err=True)
    _emit_manifest("validate", {"voxel_size": voxel_size, "jobs": jobs},
                   [str(f) for f in files], None, started, manifest)
    sys.exit(1 if n_invalid else 0)


@main.command("vbl")
@click.argument("scene_path", type=click.Path(exists=True))
@click.option("--meshes", type=click.Path(exists=True, file_okay=False))
@click.option("--before", type=click.Path(exists=True),
              help="baseline scene; adds a delta_vbl field")
@click.option("--voxel-size", default=0.05, show_default=True)
@click.option("--manifest", type=click.Path())
def cli_vbl(scene_path, meshes, before, voxel_size, manifest):
    """Compute the voxel violation report for one scene."""
    started = time.monotonic()
    cfg = VoxelConfig(voxel_size=voxel_size)
    resolver = _mesh_resolver(meshes)
    try:
        scene = _load_scene(scene_path)
        report = compute_vbl(scene, resolver, cfg).to_json_dict()
        if before:
            report["delta_vbl"] = delta_vbl(_load_scene(before), scene, resolver, cfg)
    except SsrkitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(json.dumps(report))
    _emit_manifest("vbl", {"voxel_size": voxel_size, "before": before},
                   [scene_path], None, started, manifest)


@main.command("extract-bounds")
@click.argument("mesh_path", type=click.Path(exists=True))
@click.option("--manifest", type=click.Path())
def cli_extract_bounds(mesh_path, manifest):
    """Extract SSR bounds from a floor mesh (OBJ)."""
    started = time.monotonic()
    try:
        poly = extract_corners(load_obj(mesh_path))
    except SsrkitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    bounds = {
        "bounds_top": [[float(x), poly.y_ceiling, float(z)] for x, z in poly.corners],
        "bounds_bottom": [[float(x), poly.y_floor, float(z)] for x, z in poly.corners],
    }
    click.echo(json.dumps(bounds))
    _emit_manifest("extract-bounds", {}, [mesh_path], None, started, manifest)


@main.command("sample-asset")
@click.option("--prompt", required=True)
@click.option("--size", required=True, help="target size as x,y,z meters")
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--queries", "queries_path", required=True, type=click.Path(exists=True),
              help="prompt-keyed query embedding file")
@click.option("--greedy", is_flag=True)
@click.option("--seed", type=int)
@click.option("--lambda", "lam", default=0.5, show_default=True)
@click.option("--sigma", default=0.2, show_default=True)
@click.option("--temperature", default=0.2, show_default=True)
@click.option("--top-p", default=0.95, show_default=True)
@click.option("--top-k", default=20, show_default=True)
@click.option("--manifest", type=click.Path())
def cli_sample_asset(prompt, size, catalog_path, queries_path, greedy, seed,
                     lam, sigma, temperature, top_p, top_k, manifest):
    """Retrieve an asset for a prompt and target size."""
    started = time.monotonic()
    seed = _env_seed(seed)
    try:
        catalog = load_catalog(catalog_path)
        queries = load_query_embeddings(queries_path)
        if prompt not in queries:
            raise SsrkitError(f"no query embedding for prompt {prompt!r}")
        sx, sy, sz = (float(v) for v in size.split(","))
        scores = score_assets(queries[prompt], Vec3(sx, sy, sz), catalog,
                              lam=lam, sigma=sigma)
    except (SsrkitError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    cfg = SamplerConfig(lam=lam, sigma=sigma, temperature=temperature,
                        top_p=top_p, top_k=top_k, seed=seed)
    jid = greedy_asset(scores) if greedy else sample_asset(scores, cfg)
    click.echo(json.dumps({"jid": jid, "greedy": greedy,
                           "scores": [{"jid": j, "score": s} for j, s in scores]}))
    _emit_manifest("sample-asset",
                   {"lambda": lam, "sigma": sigma, "temperature": temperature,
                    "top_p": top_p, "top_k": top_k, "greedy": greedy},
                   [catalog_path, queries_path], seed, started, manifest)


def _reward_context(scene_path, prompt, gt_path, embeddings_path, meshes,
                    voxel_size, reward_flags) -> RewardContext:
    scene = _load_scene(scene_path)
    gt_doc = json.loads(Path(gt_path).read_text(encoding="utf-8"))
    from .commands import InvalidOutput, parse_candidate_object
    gt = parse_candidate_object(json.dumps(gt_doc))
    if isinstance(gt, InvalidOutput):
        raise SsrkitError(f"ground-truth object is invalid: {gt.reason}")
    embeddings = None
    if embeddings_path:
        embeddings = load_query_embeddings(embeddings_path)
    return RewardContext(scene=scene, prompt=prompt, gt_object=gt,
                         embeddings=embeddings, meshes=_mesh_resolver(meshes),
                         cfg=RewardConfig(**reward_flags),
                         vox=VoxelConfig(voxel_size=voxel_size))


@main.command("reward")
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--prompt", required=True)
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--candidates", "candidates_path", required=True,
              type=click.Path(exists=True), help="one candidate JSON per line")
@click.option("--embeddings", "embeddings_path", type=click.Path(exists=True))
@click.option("--meshes", type=click.Path(exists=True, file_okay=False))
@click.option("--voxel-size", default=0.05, show_default=True)
@click.option("--pms-min", default=0.85, show_default=True)
@click.option("--dss-min", default=0.9, show_default=True)
@click.option("--vbl-max", default=1e-5, show_default=True)
@click.option("--size-l2-max", default=0.2, show_default=True)
@click.option("--manifest", type=click.Path())
def cli_reward(scene_path, prompt, gt_path, candidates_path, embeddings_path,
               meshes, voxel_size, pms_min, dss_min, vbl_max, size_l2_max,
               manifest):
    """Score candidate insertions, one RewardOutcome JSON per line."""
    started = time.monotonic()
    try:
        ctx = _reward_context(scene_path, prompt, gt_path, embeddings_path,
                              meshes, voxel_size,
                              {"pms_min": pms_min, "dss_min": dss_min,
                               "vbl_max": vbl_max, "size_l2_max": size_l2_max})
    except SsrkitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    with open(candidates_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            outcome = score_candidate(line, ctx)
            click.echo(json.dumps(outcome.to_json_dict()))
    _emit_manifest("reward", {"voxel_size": voxel_size, "pms_min": pms_min,
                              "dss_min": dss_min, "vbl_max": vbl_max,
                              "size_l2_max": size_l2_max},
                   [scene_path, gt_path, candidates_path], None, started, manifest)


@main.command("bon")
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--prompt", required=True)
@click.option("--candidates", "candidates_path", required=True,
              type=click.Path(exists=True))
@click.option("--n", default=0, show_default=True,
              help="consider only the first N candidates (0 = all)")
@click.option("--meshes", type=click.Path(exists=True, file_okay=False))
@click.option("--voxel-size", default=0.05, show_default=True)
@click.option("--manifest", type=click.Path())
def cli_bon(scene_path, prompt, candidates_path, n, meshes, voxel_size, manifest):
    """Best-of-N: highest PMS first, lowest delta violation second."""
    started = time.monotonic()
    from .commands import InvalidOutput, parse_candidate_object
    from .scene import add_object

    try:
        scene = _load_scene(scene_path)
        resolver = _mesh_resolver(meshes)
        cfg = VoxelConfig(voxel_size=voxel_size)
        lines = [ln.strip() for ln in
                 Path(candidates_path).read_text(encoding="utf-8").splitlines()
                 if ln.strip()]
        if n:
            lines = lines[:n]
        outcomes = []
        for line in lines:
            candidate = parse_candidate_object(line)
            if isinstance(candidate, InvalidOutput):
                outcomes.append(RewardOutcome(-1.0, "invalid_output",
                                              {"reason": candidate.reason}))
                continue
            outcomes.append(RewardOutcome(0.0, "fail_filter_masked", {
                "pms": pms(prompt, candidate.desc),
                "vbl_norm": delta_vbl(scene, add_object(scene, candidate),
                                      resolver, cfg),
            }))
        index = best_of_n(outcomes)
    except SsrkitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(json.dumps({"selected_index": index, "candidate": json.loads(lines[index]),
                           "pms": outcomes[index].components["pms"],
                           "delta_vbl": outcomes[index].components["vbl_norm"]}))
    _emit_manifest("bon", {"n": n, "voxel_size": voxel_size},
                   [scene_path, candidates_path], None, started, manifest)


@main.command("gen-instructions")
@click.argument("scenes_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--bank", "bank_path", required=True, type=click.Path(exists=True))
@click.option("--count", default=1, show_default=True,
              help="instructions per scene")
@click.option("--seed", type=int)
@click.option("--augment", "do_augment", is_flag=True)
@click.option("--manifest", type=click.Path())
def cli_gen_instructions(scenes_dir, bank_path, count, seed, do_augment, manifest):
    """Generate instruction tuples from a directory of scenes (JSONL out)."""
    started = time.monotonic()
    seed = _env_seed(seed)
    try:
        bank = PromptBank.load(bank_path)
        files = sorted(Path(scenes_dir).glob("*.json"))
        if not files:
            raise SsrkitError(f"no scene files in {scenes_dir}")
        master = np.random.default_rng(seed)
        for path in files:
            scene = _load_scene(path)
            for _ in range(count):
                sub_seed = int(master.integers(0, 2 ** 63 - 1))
                src = augment(scene, sub_seed) if do_augment else scene
                instr = gen_instruction(src, bank, sub_seed + 1)
                click.echo(json.dumps(instruction_to_json_dict(instr)))
    except SsrkitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    _emit_manifest("gen-instructions", {"count": count, "augment": do_augment},
                   [str(f) for f in files], seed, started, manifest)


@main.command("advantage")
@click.option("--rewards", "rewards_path", required=True, type=click.Path(exists=True),
              help="JSON array of group rewards")
@click.option("--manifest", type=click.Path())
def cli_advantage(rewards_path, manifest):
    """Group-normalized advantages for a reward list."""
    started = time.monotonic()
    try:
        rewards = json.loads(Path(rewards_path).read_text(encoding="utf-8"))
        result = group_advantage(rewards)
    except (SsrkitError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(json.dumps(result))
    _emit_manifest("advantage", {}, [rewards_path], None, started, manifest)


if __name__ == "__main__":
    main()
