import numpy as np
import pytest

from ssrkit import (Scene, Vec3, compute_mbl_pair, compute_oob, compute_vbl,
                    delta_vbl, place_object_voxels, validate_scene,
                    voxelize_mesh)
from ssrkit.boundary import TriangleMesh
from ssrkit.errors import LatticeMismatch, NotSingleAddition
from ssrkit.voxel import (VoxelConfig, box_mesh, cell_range,
                          scene_boundary_grid, scene_lattice_origin)

from scene_fixtures import make_box, make_scene
from voxel_oracle import OracleScene, axis_cells, random_oracle_scene

CFG = VoxelConfig()
ORIGIN = (-0.1, -0.1, -0.1)


class TestCellRange:
    def test_aligned_unit_interval(self):
        assert cell_range(0.0, 1.0, 0.0, 0.05) == (0, 19)

    def test_shifted_interval(self):
        # [0.025, 1.025] strictly overlaps cells 0..20
        assert cell_range(0.025, 1.025, 0.0, 0.05) == (0, 20)

    def test_touching_face_not_counted(self):
        # interval ending exactly on a cell boundary excludes the next cell
        assert cell_range(0.05, 0.10, 0.0, 0.05) == (1, 1)

    def test_matches_definitional_scan(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            lo = round(float(rng.uniform(-2, 2)), 3)
            hi = lo + round(float(rng.uniform(0.001, 2)), 3)
            i0, i1 = cell_range(lo, hi, -0.1, 0.05)
            assert set(range(i0, i1 + 1)) == set(axis_cells(lo, hi, -0.1))


class TestVoxelizeCounts:
    def test_lattice_aligned_unit_cube(self):
        grid = voxelize_mesh(box_mesh(1.0, 1.0, 1.0), CFG, (-0.5, 0.0, -0.5))
        assert grid.count() == 20 ** 3
        assert not grid.surface_only

    def test_half_cell_shifted_cube(self):
        grid = voxelize_mesh(box_mesh(1.0, 1.0, 1.0), CFG, (-0.525, -0.025, -0.525))
        assert grid.count() == 21 ** 3

    def test_quarter_turn_box(self):
        obj = make_box("a", (2.0, 1.0, 1.0), (0.0, 0.0, 0.0), yaw_deg=90)
        grid = place_object_voxels(obj, None, CFG, (-1.0, 0.0, -1.0))
        assert grid.dims == (20, 20, 40)
        assert grid.count() == 20 * 20 * 40

    def test_solid_fill_marks_interior(self):
        grid = voxelize_mesh(box_mesh(1.0, 1.0, 1.0), CFG, (-0.5, 0.0, -0.5))
        # a strictly interior cell has no surface in it
        assert grid.occupancy[10, 10, 10]

    def test_open_mesh_falls_back_to_surface(self):
        # one free-standing triangle: every scanline crossing count is odd
        verts = np.array([[0, 0, 0], [1, 0.5, 0], [0, 1, 1]], dtype=float)
        grid = voxelize_mesh(TriangleMesh(verts, np.array([[0, 1, 2]])), CFG, ORIGIN)
        assert grid.surface_only
        assert grid.count() > 0


class TestPairMetrics:
    def test_half_overlap_slabs(self):
        a = voxelize_mesh(box_mesh(1.0, 1.0, 1.0), CFG, (-0.5, 0.0, -0.5))
        obj = make_box("b", (1.0, 1.0, 1.0), (0.5, 0.0, 0.0))
        b = place_object_voxels(obj, None, CFG, (-0.5, 0.0, -0.5))
        assert compute_mbl_pair(a, b) == 10 * 20 * 20
        assert compute_mbl_pair(a, b, early_stop=False) == 10 * 20 * 20

    def test_disjoint_grids(self):
        a = voxelize_mesh(box_mesh(0.5, 0.5, 0.5), CFG, ORIGIN)
        obj = make_box("b", (0.5, 0.5, 0.5), (3.0, 0.0, 3.0))
        b = place_object_voxels(obj, None, CFG, ORIGIN)
        assert compute_mbl_pair(a, b) == 0

    def test_stacked_no_xz_gap_but_y_gap(self):
        # early-stop projects to (x, z); grids share footprint but not height
        a = voxelize_mesh(box_mesh(0.5, 0.5, 0.5), CFG, ORIGIN)
        obj = make_box("b", (0.5, 0.5, 0.5), (0.0, 1.0, 0.0))
        b = place_object_voxels(obj, None, CFG, ORIGIN)
        assert compute_mbl_pair(a, b) == 0
        assert compute_mbl_pair(a, b, early_stop=False) == 0

    def test_lattice_mismatch(self):
        a = voxelize_mesh(box_mesh(1, 1, 1), CFG, (0.0, 0.0, 0.0))
        b = voxelize_mesh(box_mesh(1, 1, 1), CFG, (0.013, 0.0, 0.0))
        with pytest.raises(LatticeMismatch):
            compute_mbl_pair(a, b)
        with pytest.raises(LatticeMismatch):
            compute_oob(a, b)


class TestOobContainment:
    def test_contained_object_zero_oob(self):
        scene = make_scene([make_box("a", (1.0, 1.0, 1.0), (0.3, 0.2, -0.4))])
        report = compute_vbl(scene)
        assert report.oob_voxels == 0

    def test_fully_outside_object(self):
        obj = make_box("a", (1.0, 1.0, 1.0), (10.0, 0.0, 10.0))
        scene = make_scene([obj])
        report = compute_vbl(scene)
        assert report.oob_voxels == report.total_object_voxels == 20 ** 3
        assert report.vbl_norm == 1.0

    def test_below_floor_counts(self):
        scene = make_scene([make_box("a", (1.0, 1.0, 1.0), (0.0, -0.5, 0.0))])
        report = compute_vbl(scene)
        assert report.oob_voxels > 0


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", range(10))
    def test_random_scene_matches_oracle(self, seed):
        osc = random_oracle_scene(seed)
        expected = osc.expected()
        report = compute_vbl(osc.scene)
        assert report.oob_voxels == expected["oob_voxels"]
        assert report.mbl_voxels == expected["mbl_voxels"]
        assert report.vbl_voxels == expected["vbl_voxels"]
        assert report.per_object_oob == expected["per_object_oob"]
        assert report.per_pair_mbl == expected["per_pair_mbl"]
        assert report.total_object_voxels == expected["total_object_voxels"]

    def test_early_stop_is_transparent(self):
        osc = random_oracle_scene(99)
        fast = compute_vbl(osc.scene, early_stop=True)
        slow = compute_vbl(osc.scene, early_stop=False)
        assert fast == slow

    def test_lattice_anchor_is_padded_min(self):
        scene = make_scene([], width=3.0, depth=4.0)
        origin = scene_lattice_origin(scene, CFG)
        assert origin == pytest.approx([-1.6, -0.1, -2.1])

    def test_boundary_grid_full_room(self):
        scene = make_scene([], width=2.0, depth=2.0, height=2.6)
        grid = scene_boundary_grid(scene, CFG)
        assert grid.count() == 40 * 52 * 40


class TestDeltaVbl:
    def test_single_addition(self):
        base = make_scene([make_box("a", (1, 1, 1), (0.0, 0.0, 0.0))])
        inside = make_box("b", (0.5, 0.5, 0.5), (1.2, 0.0, 1.2))
        outside = make_box("c", (0.5, 0.5, 0.5), (9.0, 0.0, 9.0))
        from ssrkit import add_object
        assert delta_vbl(base, add_object(base, inside)) == pytest.approx(0.0)
        assert delta_vbl(base, add_object(base, outside)) > 0.0

    def test_rejects_non_single_addition(self):
        base = make_scene([make_box("a", (1, 1, 1), (0, 0, 0))])
        with pytest.raises(NotSingleAddition):
            delta_vbl(base, base)
        swapped = make_scene([make_box("x", (1, 1, 1), (0, 0, 0)),
                              make_box("y", (1, 1, 1), (1, 0, 1))])
        with pytest.raises(NotSingleAddition):
            delta_vbl(base, swapped)


def _cluster(n):
    """n small boxes well inside a 4x4 room, pairwise separated."""
    spots = [(-1.2, -1.2), (-1.2, 0.0), (-1.2, 1.2), (0.0, -1.2),
             (0.0, 0.0), (0.0, 1.2), (1.2, -1.2), (1.2, 0.0)]
    return [make_box(f"o{i}", (0.4, 0.4, 0.4), (x, 0.0, z))
            for i, (x, z) in enumerate(spots[:n])]


class TestValidityFilter:
    def test_ok(self):
        scene = make_scene(_cluster(4))
        v = validate_scene(scene)
        assert v.is_valid and v.reason == "ok" and v.rescued_index is None

    def test_too_few_objects(self):
        v = validate_scene(make_scene(_cluster(2)))
        assert not v.is_valid and v.reason == "object_count"

    def test_too_many_objects(self):
        objs = [make_box(f"o{i}", (0.05, 0.05, 0.05), (0.0, 0.04 * i, 0.0))
                for i in range(51)]
        v = validate_scene(make_scene(objs))
        assert not v.is_valid and v.reason == "object_count"

    def test_bad_bounds(self):
        scene = make_scene(_cluster(4))
        broken = Scene(scene.room_type, scene.bounds_top[:3],
                       scene.bounds_bottom[:3], scene.objects)
        v = validate_scene(broken)
        assert not v.is_valid and v.reason == "bad_bounds"

    def test_rescued_by_dropping_the_stray(self):
        objs = _cluster(3) + [make_box("stray", (1.0, 1.0, 1.0), (9.0, 0.0, 9.0))]
        v = validate_scene(make_scene(objs))
        assert v.is_valid and v.reason == "rescued" and v.rescued_index == 3

    def test_rescue_picks_lowest_index(self):
        # two identical strays stacked at the same spot: dropping either works
        stray = make_box("stray", (1.2, 1.2, 1.2), (9.0, 0.0, 9.0))
        objs = [stray] + _cluster(3) + [stray]
        v = validate_scene(make_scene(objs))
        if v.reason == "rescued":
            assert v.rescued_index == 0

    def test_unrescuable(self):
        strays = [make_box("s1", (1.0, 1.0, 1.0), (9.0, 0.0, 9.0)),
                  make_box("s2", (1.0, 1.0, 1.0), (-9.0, 0.0, -9.0))]
        v = validate_scene(make_scene(_cluster(3) + strays))
        assert not v.is_valid and v.reason == "vbl_exceeded"
