"""Acceptance gate: one test per headline guarantee, each printing a
pass/fail line so the suite doubles as a checklist."""

import json
import math
import time
from collections import Counter

import numpy as np
import pytest
from click.testing import CliRunner

from ssrkit import (PromptBank, RewardConfig, RewardContext, RewardOutcome,
                    SamplerConfig, Vec3, best_of_n, compute_vbl,
                    gen_instruction, greedy_asset, pms, sample_asset,
                    serialize_ssr, validate_scene, voxelize_mesh)
from ssrkit.assets import _nucleus_probs
from ssrkit.boundary import RectilinearPolygon, extract_corners
from ssrkit.cli import main as cli_main
from ssrkit.rewards import score_candidate
from ssrkit.voxel import VoxelConfig, box_mesh, place_object_voxels

from scene_fixtures import make_box, make_scene
from test_boundary import grid_floor_mesh
from voxel_oracle import random_oracle_scene


def report(name: str, ok: bool, detail: str = ""):
    tag = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{tag}] {name}{suffix}")
    assert ok, f"{name}{suffix}"


class TestAcceptance:
    def test_01_violation_counts_match_analytic_oracle(self):
        started = time.monotonic()
        mismatches = 0
        for seed in range(50):
            osc = random_oracle_scene(seed)
            expected = osc.expected()
            got = compute_vbl(osc.scene)
            same = (got.oob_voxels == expected["oob_voxels"]
                    and got.mbl_voxels == expected["mbl_voxels"]
                    and got.per_object_oob == expected["per_object_oob"]
                    and got.per_pair_mbl == expected["per_pair_mbl"]
                    and got.total_object_voxels == expected["total_object_voxels"])
            mismatches += not same
        elapsed = time.monotonic() - started
        report("violation counts equal analytic oracle on 50 random scenes",
               mismatches == 0 and elapsed < 60.0,
               f"{mismatches} mismatches, {elapsed:.1f}s")

    def test_02_canonical_voxel_counts(self):
        cfg = VoxelConfig()
        cube = voxelize_mesh(box_mesh(1.0, 1.0, 1.0), cfg, (-0.5, 0.0, -0.5))
        a = cube.count()
        from ssrkit import compute_mbl_pair
        other = place_object_voxels(make_box("b", (1.0, 1.0, 1.0), (0.5, 0.0, 0.0)),
                                    None, cfg, (-0.5, 0.0, -0.5))
        overlap = compute_mbl_pair(cube, other)
        report("lattice-aligned unit cube voxelizes to exactly 8000 cells",
               a == 8000, f"got {a}")
        report("half-offset unit cubes overlap in exactly 4000 cells",
               overlap == 4000, f"got {overlap}")

    def test_03_contained_objects_have_zero_oob(self):
        rng = np.random.default_rng(2024)
        bad = 0
        for _ in range(100):
            size = tuple(round(float(rng.uniform(0.2, 1.0)), 3) for _ in range(3))
            # position keeps the rotated AABB strictly inside the 4x4x2.6 room
            margin = max(size[0], size[2]) / 2.0 + 0.05
            pos = (round(float(rng.uniform(-2 + margin, 2 - margin)), 3),
                   round(float(rng.uniform(0.0, 2.6 - size[1] - 0.05)), 3),
                   round(float(rng.uniform(-2 + margin, 2 - margin)), 3))
            yaw = float(rng.integers(0, 4)) * 90.0
            scene = make_scene([make_box("obj", size, pos, yaw_deg=yaw)])
            if compute_vbl(scene).oob_voxels != 0:
                bad += 1
        report("100 strictly-contained placements all have zero out-of-bounds",
               bad == 0, f"{bad} failures")

    def test_04_corner_extraction(self):
        square = extract_corners(grid_floor_mesh([[0, 0], [3, 0], [3, 3], [0, 3]]))
        l_corners = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0],
                     [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]
        lshape = extract_corners(grid_floor_mesh(l_corners))
        ok = len(square.corners) == 4 and len(lshape.corners) == 6
        report("corner extraction: square yields 4 corners, L-shape yields 6",
               ok, f"got {len(square.corners)} and {len(lshape.corners)}")

        stable = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            mesh = grid_floor_mesh(l_corners, jitter=2e-5, rng=rng)
            poly = extract_corners(mesh)
            if len(poly.corners) == 6 and all(
                    min(np.abs(np.array(l_corners) - c).sum(axis=1)) < 1e-4
                    for c in poly.corners):
                stable += 1
        report("corner extraction stable under 20 sub-tolerance jitter seeds",
               stable == 20, f"{stable}/20")

    def test_05_sampler_contract(self):
        cfg = SamplerConfig()
        defaults_ok = (cfg.lam, cfg.sigma, cfg.temperature, cfg.top_p,
                       cfg.top_k) == (0.5, 0.2, 0.2, 0.95, 20)
        report("sampler defaults are lambda=0.5 sigma=0.2 temp=0.2 "
               "top_p=0.95 top_k=20", defaults_ok)

        scores = [(f"j{i}", float(s)) for i, s in enumerate(np.linspace(0, 1, 40))]
        _, probs = _nucleus_probs(scores, cfg)
        report("filtered sampling distribution sums to 1 within 1e-9",
               abs(float(probs.sum()) - 1.0) <= 1e-9,
               f"sum={float(probs.sum()):.2e}")

        peak = [("best", 1.0)] + [(f"j{i}", 0.5) for i in range(10)]
        hits = sum(sample_asset(peak, SamplerConfig(temperature=0.01, top_p=1.0,
                                                    seed=s)) == "best"
                   for s in range(10_000))
        report("temperature 0.01 concentrates >= 99.9% of 10k draws on the "
               "top asset", hits >= 9990, f"{hits}/10000")

        tie = greedy_asset([("zz", 1.0), ("aa", 1.0), ("mm", 1.0)])
        report("greedy selection breaks ties by lexicographic id",
               tie == "aa", f"got {tie}")

    def test_06_reward_filter(self):
        cfg = RewardConfig()
        thresholds_ok = (cfg.pms_min, cfg.dss_min, cfg.vbl_max,
                         cfg.size_l2_max) == (0.85, 0.9, 1e-5, 0.2)
        report("reward thresholds are pms>=0.85 dss>=0.9 dvbl<1e-5 size<0.2",
               thresholds_ok)

        scene = make_scene([make_box("existing table", (0.8, 0.7, 0.8),
                                     (1.2, 0.0, 1.2))])
        gt = make_box("red chair with padded seat", (0.5, 0.9, 0.5),
                      (-1.0, 0.0, -1.0))
        good = {"desc": "red chair with padded seat", "size": [0.5, 0.9, 0.5],
                "pos": [-1.0, 0.0, -1.0], "rot": [1.0, 0.0, 0.0, 0.0]}
        emb = {gt.desc: [1.0, 0.0], "red chair, metal frame": [0.6, 0.8]}
        ctx = RewardContext(scene, "red chair", gt, embeddings=emb)

        cases = {
            "pass": dict(good),
            "pms": {**good, "desc": "chair with padded seat"},
            "dss": {**good, "desc": "red chair, metal frame"},
            "vbl": {**good, "pos": [1.2, 0.0, 1.2]},
            "size": {**good, "size": [0.5, 0.9, 0.9]},
        }
        results = {name: score_candidate(json.dumps(doc), ctx)
                   for name, doc in cases.items()}
        ok = (results["pass"].status == "pass"
              and results["pass"].reward == 1.0
              and all(results[k].status == "fail_filter_masked"
                      and results[k].reward == 0.0
                      for k in ("pms", "dss", "vbl", "size")))
        report("filter fixtures: clean pass plus four single-criterion "
               "failures, each masked", ok,
               str({k: v.status for k, v in results.items()}))

        broken = score_candidate("here you go: a chair", ctx)
        report("malformed candidate earns exactly -1.0",
               broken.reward == -1.0 and broken.status == "invalid_output")

    def test_07_prompt_match_fractions(self):
        cases = [
            ("red chair", "a red chair with arms", 1.0),
            ("red chair", "a blue chair", 0.5),
            ("red chair", "a blue table", 0.0),
            ("Red CHAIR", "red chair", 1.0),
            ("a modern wooden desk", "wooden desk", 0.5),
            ("bed", "a king-size bed, very large", 1.0),
            ("lamp.", "lamp", 1.0),
            ("two two two", "two", 1.0),
            ("sofa cushion pillow throw", "a sofa with one cushion", 0.5),
            ("nightstand", "bedside nightstand (wood)", 1.0),
        ]
        bad = [(p, d) for p, d, want in cases if pms(p, d) != want]
        report("prompt match score exact on 10 hand-computed pairs",
               not bad, f"failed: {bad}")

    def test_08_instruction_marginals(self):
        scene = make_scene([
            make_box(f"obj {i}", (0.3, 0.3, 0.3), (-1.2 + 0.8 * i, 0.0, -1.2),
                     jid=f"j{i}") for i in range(5)])
        bank = PromptBank({f"j{i}": [f"p{i}-{k}" for k in range(10)]
                           for i in range(5)})
        n = 100_000
        z_counts = Counter()
        z2_kept = Counter()
        reconstruct_ok = True
        originals = list(scene.objects)
        for seed in range(n):
            instr = gen_instruction(scene, bank, seed)
            z_counts[instr.z_type] += 1
            if instr.z_type == "Z2_random":
                z2_kept[len(instr.partial_scene.objects)] += 1
            if seed < 2000:
                pool = list(originals)
                for obj in instr.partial_scene.objects:
                    if obj not in pool:
                        reconstruct_ok = False
                        break
                    pool.remove(obj)
                else:
                    reconstruct_ok = reconstruct_ok and instr.gt_object in pool

        f0 = z_counts["Z0_zero_start"] / n
        f1 = z_counts["Z1_full_scene"] / n
        marginals_ok = abs(f0 - 0.1) < 0.01 and abs(f1 - 0.1) < 0.01
        report("empty-start and completion modes each occur 10% +/- 1% "
               "over 100k draws", marginals_ok, f"{f0:.3f}, {f1:.3f}")

        n2 = sum(z2_kept.values())
        p = 1.0 / 5.0
        sigma = math.sqrt(p * (1 - p) / n2)
        uniform_ok = all(abs(z2_kept[k] / n2 - p) < 4 * sigma + 1e-9
                         for k in range(5))
        report("random-prefix size is uniform within 4 sigma over its draws",
               uniform_ok, str(dict(sorted(z2_kept.items()))))

        report("partial scene plus target always reconstructs a sub-multiset "
               "of the source", reconstruct_ok)

    def test_09_validity_filter(self):
        from ssrkit.voxel import MAX_OBJECTS, MIN_OBJECTS, VBL_VALIDITY_MAX
        thresholds_ok = (MIN_OBJECTS, MAX_OBJECTS, VBL_VALIDITY_MAX) == (3, 50, 0.1)
        report("validity thresholds are 3..50 objects and violation < 0.1",
               thresholds_ok)

        inside = [make_box(f"o{i}", (0.4, 0.4, 0.4), (x, 0.0, z))
                  for i, (x, z) in enumerate([(-1.2, -1.2), (0.0, 0.0),
                                              (1.2, 1.2)])]
        stray = make_box("stray", (1.0, 1.0, 1.0), (9.0, 0.0, 9.0))
        good = validate_scene(make_scene(inside))
        rescued = validate_scene(make_scene(inside + [stray]))
        doomed = validate_scene(make_scene(
            inside + [stray, make_box("s2", (1.0, 1.0, 1.0), (-9.0, 0.0, -9.0))]))
        ok = (good.is_valid and good.reason == "ok"
              and rescued.is_valid and rescued.reason == "rescued"
              and rescued.rescued_index == 3
              and not doomed.is_valid and doomed.reason == "vbl_exceeded")
        report("validity fixtures: clean pass, single-removal rescue at the "
               "stray's index, unrescuable rejection", ok,
               f"{good.reason}/{rescued.reason}:{rescued.rescued_index}/{doomed.reason}")

    def test_10_best_of_n_ordering(self):
        def outcome(status, p=0.0, v=0.0):
            return RewardOutcome(0.0, status, {"pms": p, "vbl_norm": v})

        picks = [
            best_of_n([outcome("pass", 0.5), outcome("pass", 0.9),
                       outcome("pass", 0.7)]),
            best_of_n([outcome("pass", 0.9, 0.02), outcome("pass", 0.9, 0.0),
                       outcome("pass", 0.9, 0.01)]),
            best_of_n([outcome("invalid_output", 1.0),
                       outcome("pass", 0.1, 0.5)]),
            best_of_n([outcome("fail_filter_masked", 0.9, 0.0),
                       outcome("pass", 0.9, 0.0)]),
        ]
        report("best-of-N: max prompt match, then min violation, then lowest "
               "index; invalid never wins", picks == [1, 1, 1, 0],
               f"got {picks}")

    def test_11_cli_determinism(self, tmp_path):
        runner = CliRunner()
        scene = make_scene([
            make_box("red chair", (0.5, 0.9, 0.5), (-1.2, 0.0, -1.2), jid="j1"),
            make_box("blue table", (0.8, 0.7, 0.8), (1.2, 0.0, 1.2), jid="j2"),
            make_box("floor lamp", (0.3, 1.5, 0.3), (1.2, 0.0, -1.2), jid="j3"),
        ])
        scenes = tmp_path / "scenes"
        scenes.mkdir()
        (scenes / "one.json").write_text(serialize_ssr(scene))
        bank_path = tmp_path / "bank.json"
        bank_path.write_text(json.dumps(
            {jid: [f"prompt {jid} {i}" for i in range(10)]
             for jid in ("j1", "j2", "j3")}))
        cat = tmp_path / "catalog.tsv"
        cat.write_text("#dim=3\n"
                       "a1\tred chair\t0.5\t0.9\t0.5\t1 0 0\n"
                       "b2\tblue table\t1.2\t0.7\t0.8\t0 1 0\n"
                       "c3\tfloor lamp\t0.3\t1.5\t0.3\t0 0 1\n")
        q = tmp_path / "queries.tsv"
        q.write_text("#dim=3\nq\ta red chair\t0\t0\t0\t1 0 0\n")

        jobs = [
            ["validate", str(scenes), "--json"],
            ["vbl", str(scenes / "one.json")],
            ["gen-instructions", str(scenes), "--bank", str(bank_path),
             "--count", "20", "--seed", "7", "--augment"],
            ["sample-asset", "--prompt", "a red chair", "--size", "0.5,0.9,0.5",
             "--catalog", str(cat), "--queries", str(q), "--seed", "7"],
        ]
        stable = True
        for args in jobs:
            first = runner.invoke(cli_main, args)
            second = runner.invoke(cli_main, args)
            if first.stdout_bytes != second.stdout_bytes:
                stable = False
        report("CLI stdout is byte-identical across repeated same-seed runs",
               stable)
