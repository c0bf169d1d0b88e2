"""Solid voxelization on a shared lattice and the voxel violation metrics.

Occupancy semantics: a cell is occupied iff the geometry overlaps the open
cell with positive measure (touching a cell face does not count), realized as
a strict triangle/box SAT test for the surface plus ray-parity interior fill
at cell centers. All grids for one scene share a global lattice so per-cell
products across grids are meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .boundary import TriangleMesh, extrude_boundary_mesh, polygon_from_scene
from .errors import LatticeMismatch, NotSingleAddition
from .scene import Scene, SceneObject, SceneValidity, check_bounds

# separation slack for the strict overlap predicate; geometry authored at
# millimeter precision keeps true gaps at 0 or >= 1e-3, far from this
EPS = 1e-9

# ray jitter for parity fill; small enough that any cell whose classification
# it could change already contains surface and is marked there
_RAY_JITTER_Y = 1.2345678e-7
_RAY_JITTER_Z = 2.3456789e-7

MeshResolver = Callable[[SceneObject], Optional[TriangleMesh]]


@dataclass(frozen=True)
class VoxelConfig:
    voxel_size: float = 0.05
    padding: int = 2

    def __post_init__(self):
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")


@dataclass(frozen=True)
class VoxelGrid:
    lattice_origin: tuple[float, float, float]
    voxel_size: float
    offset: tuple[int, int, int]      # cell offset within the shared lattice
    occupancy: np.ndarray             # bool (nx, ny, nz)
    surface_only: bool = False        # parity fill fell back to surface rasterization

    @property
    def origin(self) -> np.ndarray:
        return (np.asarray(self.lattice_origin)
                + np.asarray(self.offset) * self.voxel_size)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.occupancy.shape

    def count(self) -> int:
        return int(self.occupancy.sum())

    def same_lattice(self, other: "VoxelGrid") -> bool:
        return (abs(self.voxel_size - other.voxel_size) < 1e-12
                and np.allclose(self.lattice_origin, other.lattice_origin, atol=1e-9))


def cell_range(lo: float, hi: float, origin: float, size: float) -> tuple[int, int]:
    """Inclusive index range of cells strictly overlapping [lo, hi]."""
    eta = EPS / size
    i_min = int(math.floor((lo - origin) / size + eta))
    i_max = int(math.ceil((hi - origin) / size - eta)) - 1
    return i_min, i_max


# ---------------------------------------------------------------------------
# triangle/box SAT, vectorized over cells

def _tri_box_overlap(tri: np.ndarray, centers: np.ndarray, h: float) -> np.ndarray:
    """Strict SAT overlap of one triangle against many boxes of half-extent h
    centered at ``centers``; touching contact does not count as overlap."""
    v = tri[None, :, :] - centers[:, None, :]  # (N, 3, 3)
    ok = np.ones(len(centers), dtype=bool)

    # box axes
    for a in range(3):
        p = v[:, :, a]
        ok &= (p.min(axis=1) < h - EPS) & (p.max(axis=1) > -h + EPS)

    edges = tri[[1, 2, 0]] - tri  # (3, 3)

    # triangle normal
    n = np.cross(edges[0], edges[1])
    r = h * np.abs(n).sum()
    d = v[:, 0, :] @ n
    ok &= np.abs(d) < r - EPS

    # edge cross box-axis axes
    for e in edges:
        for a in range(3):
            axis = np.zeros(3)
            axis[a] = 1.0
            sep = np.cross(e, axis)
            norm1 = np.abs(sep).sum()
            if norm1 < 1e-12:
                continue
            p = v @ sep  # (N, 3)
            r = h * norm1
            ok &= (p.min(axis=1) < r - EPS) & (p.max(axis=1) > -r + EPS)
    return ok


def _point_in_tri_2d(py, pz, t):
    """Strict 2D containment of jittered points in a triangle projected to
    (y, z); t is (3, 2)."""
    d0 = (t[1, 0] - t[0, 0]) * (pz - t[0, 1]) - (t[1, 1] - t[0, 1]) * (py - t[0, 0])
    d1 = (t[2, 0] - t[1, 0]) * (pz - t[1, 1]) - (t[2, 1] - t[1, 1]) * (py - t[1, 0])
    d2 = (t[0, 0] - t[2, 0]) * (pz - t[2, 1]) - (t[0, 1] - t[2, 1]) * (py - t[2, 0])
    return ((d0 > 0) & (d1 > 0) & (d2 > 0)) | ((d0 < 0) & (d1 < 0) & (d2 < 0))


def voxelize_mesh(mesh: TriangleMesh, cfg: VoxelConfig,
                  lattice_origin) -> VoxelGrid:
    """Solid-voxelize a mesh on the shared lattice.

    Surface cells come from the conservative SAT test; interior cells from +x
    ray parity at (jittered) cell centers. If parity is inconsistent on at
    least 1% of the scanlines that hit the mesh, the result falls back to
    surface-only occupancy with ``surface_only`` set.
    """
    origin = np.asarray(lattice_origin, dtype=float)
    g = cfg.voxel_size
    lo, hi = mesh.bounds()
    ranges = [cell_range(lo[a], hi[a], origin[a], g) for a in range(3)]
    off = np.array([r[0] for r in ranges])
    dims = tuple(max(r[1] - r[0] + 1, 0) for r in ranges)
    occ = np.zeros(dims, dtype=bool)
    if 0 in dims:
        return VoxelGrid(tuple(origin), g, tuple(int(o) for o in off), occ)

    tris = mesh.triangle_vertices()
    half = g / 2.0

    # cell center coordinate per axis (relative to this grid's index space)
    centers_axis = [origin[a] + (off[a] + np.arange(dims[a]) + 0.5) * g
                    for a in range(3)]

    # --- surface rasterization
    for tri in tris:
        tlo, thi = tri.min(axis=0), tri.max(axis=0)
        idx = []
        for a in range(3):
            i0, i1 = cell_range(tlo[a], thi[a], origin[a], g)
            i0 = max(i0 - off[a], 0)
            i1 = min(i1 - off[a], dims[a] - 1)
            if i1 < i0:
                idx = None
                break
            idx.append(np.arange(i0, i1 + 1))
        if idx is None:
            continue
        ii, jj, kk = np.meshgrid(*idx, indexing="ij")
        flat = np.column_stack([centers_axis[0][ii.ravel()],
                                centers_axis[1][jj.ravel()],
                                centers_axis[2][kk.ravel()]])
        hit = _tri_box_overlap(tri, flat, half)
        occ[ii.ravel()[hit], jj.ravel()[hit], kk.ravel()[hit]] = True

    # --- interior fill by +x ray parity per (y, z) column
    ny, nz = dims[1], dims[2]
    ray_y = centers_axis[1] + _RAY_JITTER_Y
    ray_z = centers_axis[2] + _RAY_JITTER_Z
    col_hits: list[np.ndarray] = []
    col_xs: list[np.ndarray] = []
    for tri in tris:
        e0 = tri[1] - tri[0]
        e1 = tri[2] - tri[0]
        n = np.cross(e0, e1)
        if abs(n[0]) < 1e-12:
            continue  # parallel to the ray
        t2 = tri[:, [1, 2]]  # project to (y, z)
        j0, j1 = cell_range(t2[:, 0].min(), t2[:, 0].max(), origin[1], g)
        k0, k1 = cell_range(t2[:, 1].min(), t2[:, 1].max(), origin[2], g)
        j0 = max(j0 - off[1], 0); j1 = min(j1 - off[1] + 1, ny)
        k0 = max(k0 - off[2], 0); k1 = min(k1 - off[2] + 1, nz)
        if j1 <= j0 or k1 <= k0:
            continue
        jy, kz = np.meshgrid(np.arange(j0, j1), np.arange(k0, k1), indexing="ij")
        py = ray_y[jy]
        pz = ray_z[kz]
        inside = _point_in_tri_2d(py, pz, t2)
        if not inside.any():
            continue
        py_in, pz_in = py[inside], pz[inside]
        x_cross = tri[0, 0] - (n[1] * (py_in - tri[0, 1])
                               + n[2] * (pz_in - tri[0, 2])) / n[0]
        col_hits.append((jy[inside] * nz + kz[inside]).ravel())
        col_xs.append(x_cross.ravel())

    n_bad = 0
    n_cols = 0
    interior = np.zeros(dims, dtype=bool)
    if col_hits:
        cols = np.concatenate(col_hits)
        xs = np.concatenate(col_xs)
        order = np.lexsort((xs, cols))
        cols, xs = cols[order], xs[order]
        starts = np.flatnonzero(np.r_[True, cols[1:] != cols[:-1]])
        ends = np.r_[starts[1:], len(cols)]
        cx0 = centers_axis[0][0]
        n_cols = len(starts)
        for s, e in zip(starts, ends):
            col_x = xs[s:e]
            if len(col_x) % 2:
                n_bad += 1
            j, k = divmod(int(cols[s]), nz)
            for m in range(len(col_x) // 2):
                x0, x1 = col_x[2 * m], col_x[2 * m + 1]
                i_lo = max(int(math.floor((x0 - cx0) / g)) + 1, 0)
                i_hi = min(int(math.ceil((x1 - cx0) / g)) - 1, dims[0] - 1)
                if i_hi >= i_lo:
                    interior[i_lo:i_hi + 1, j, k] = True

    surface_only = n_cols > 0 and n_bad / n_cols >= 0.01
    if not surface_only:
        occ |= interior
    return VoxelGrid(tuple(origin), g, tuple(int(o) for o in off), occ,
                     surface_only=surface_only)


# ---------------------------------------------------------------------------
# object placement

def box_mesh(size_x: float, size_y: float, size_z: float) -> TriangleMesh:
    """Axis-aligned box with bottom-center at the origin."""
    hx, hz = size_x / 2.0, size_z / 2.0
    v = np.array([[sx, sy, sz]
                  for sx in (-hx, hx) for sy in (0.0, size_y) for sz in (-hz, hz)])
    # index layout: bit2 = x, bit1 = y, bit0 = z
    quads = [
        (0, 1, 3, 2),  # -x
        (4, 6, 7, 5),  # +x
        (0, 4, 5, 1),  # -z
        (2, 3, 7, 6),  # +z
        (0, 2, 6, 4),  # -y
        (1, 5, 7, 3),  # +y
    ]
    tris = []
    for a, b, c, d in quads:
        tris.append([a, b, c])
        tris.append([a, c, d])
    return TriangleMesh(v, np.array(tris))


def transform_object_mesh(obj: SceneObject, mesh: TriangleMesh | None) -> TriangleMesh:
    """Object geometry in scene coordinates: the mesh (or its bounding box)
    scaled to obj.size, rotated by obj.rot about the vertical axis through its
    bottom-center, and translated to obj.pos."""
    if mesh is None:
        mesh = box_mesh(obj.size.x, obj.size.y, obj.size.z)
        verts = mesh.vertices
    else:
        lo, hi = mesh.bounds()
        extents = np.maximum(hi - lo, 1e-12)
        scale = obj.size.as_array() / extents
        bottom_center = np.array([(lo[0] + hi[0]) / 2.0, lo[1], (lo[2] + hi[2]) / 2.0])
        verts = (mesh.vertices - bottom_center) * scale
    rot = obj.rot.rotation_matrix()
    verts = verts @ rot.T + obj.pos.as_array()
    return TriangleMesh(verts, mesh.triangles)


def place_object_voxels(obj: SceneObject, mesh: TriangleMesh | None,
                        cfg: VoxelConfig, lattice_origin) -> VoxelGrid:
    return voxelize_mesh(transform_object_mesh(obj, mesh), cfg, lattice_origin)


# ---------------------------------------------------------------------------
# metrics

def _overlap_window(a: VoxelGrid, b: VoxelGrid):
    """Matching slices of the two grids over their common lattice window, or
    None when the windows are disjoint."""
    lo = np.maximum(a.offset, b.offset)
    hi = np.minimum(np.asarray(a.offset) + a.dims, np.asarray(b.offset) + b.dims)
    if (hi <= lo).any():
        return None
    sa = tuple(slice(lo[i] - a.offset[i], hi[i] - a.offset[i]) for i in range(3))
    sb = tuple(slice(lo[i] - b.offset[i], hi[i] - b.offset[i]) for i in range(3))
    return sa, sb


def compute_oob(obj_grid: VoxelGrid, scene_grid: VoxelGrid) -> int:
    """Occupied object voxels not covered by the scene boundary occupancy."""
    if not obj_grid.same_lattice(scene_grid):
        raise LatticeMismatch("grids do not share a lattice")
    total = obj_grid.count()
    window = _overlap_window(obj_grid, scene_grid)
    if window is None:
        return total
    sa, sb = window
    inside = int((obj_grid.occupancy[sa] & scene_grid.occupancy[sb]).sum())
    return total - inside


def compute_mbl_pair(a: VoxelGrid, b: VoxelGrid, early_stop: bool = True) -> int:
    """Voxel overlap count between two object grids; with early_stop, a
    disjoint 2D (x, z) footprint skips the 3D intersection entirely."""
    if not a.same_lattice(b):
        raise LatticeMismatch("grids do not share a lattice")
    window = _overlap_window(a, b)
    if window is None:
        return 0
    sa, sb = window
    if early_stop:
        proj_a = a.occupancy[sa].any(axis=1)
        proj_b = b.occupancy[sb].any(axis=1)
        if not (proj_a & proj_b).any():
            return 0
    return int((a.occupancy[sa] & b.occupancy[sb]).sum())


@dataclass(frozen=True)
class ViolationReport:
    oob_voxels: int
    mbl_voxels: int
    vbl_voxels: int
    per_object_oob: list[int]
    per_pair_mbl: dict[tuple[int, int], int]
    total_object_voxels: int
    oob_norm: float
    mbl_norm: float
    vbl_norm: float

    def to_json_dict(self) -> dict:
        return {
            "oob_voxels": self.oob_voxels,
            "mbl_voxels": self.mbl_voxels,
            "vbl_voxels": self.vbl_voxels,
            "per_object_oob": list(self.per_object_oob),
            "per_pair_mbl": {f"{i},{j}": v for (i, j), v in sorted(self.per_pair_mbl.items())},
            "total_object_voxels": self.total_object_voxels,
            "oob_norm": self.oob_norm,
            "mbl_norm": self.mbl_norm,
            "vbl_norm": self.vbl_norm,
        }


def _resolve(meshes: MeshResolver | None, obj: SceneObject) -> TriangleMesh | None:
    return meshes(obj) if meshes is not None else None


def scene_lattice_origin(scene: Scene, cfg: VoxelConfig) -> np.ndarray:
    """Shared lattice anchor: boundary AABB min, padded outward."""
    corners = scene.floor_corners()
    lo = np.array([corners[:, 0].min(), scene.floor_y, corners[:, 1].min()])
    return lo - cfg.padding * cfg.voxel_size


def scene_boundary_grid(scene: Scene, cfg: VoxelConfig,
                        lattice_origin=None) -> VoxelGrid:
    if lattice_origin is None:
        lattice_origin = scene_lattice_origin(scene, cfg)
    bmesh = extrude_boundary_mesh(polygon_from_scene(scene))
    return voxelize_mesh(bmesh, cfg, lattice_origin)


def _violation_with_counts(scene: Scene, meshes: MeshResolver | None,
                           cfg: VoxelConfig, early_stop: bool = True
                           ) -> tuple[ViolationReport, list[int]]:
    lattice_origin = scene_lattice_origin(scene, cfg)
    scene_grid = scene_boundary_grid(scene, cfg, lattice_origin)
    grids = [place_object_voxels(o, _resolve(meshes, o), cfg, lattice_origin)
             for o in scene.objects]
    counts = [grid.count() for grid in grids]
    per_object_oob = [compute_oob(grid, scene_grid) for grid in grids]
    per_pair_mbl: dict[tuple[int, int], int] = {}
    for m in range(len(grids)):
        for n in range(m + 1, len(grids)):
            overlap = compute_mbl_pair(grids[m], grids[n], early_stop=early_stop)
            if overlap:
                per_pair_mbl[(m, n)] = overlap
    oob = sum(per_object_oob)
    mbl = sum(per_pair_mbl.values())
    total = sum(counts)
    report = ViolationReport(
        oob_voxels=oob,
        mbl_voxels=mbl,
        vbl_voxels=oob + mbl,
        per_object_oob=per_object_oob,
        per_pair_mbl=per_pair_mbl,
        total_object_voxels=total,
        oob_norm=oob / total if total else 0.0,
        mbl_norm=mbl / total if total else 0.0,
        vbl_norm=(oob + mbl) / total if total else 0.0,
    )
    return report, counts


def compute_vbl(scene: Scene, meshes: MeshResolver | None = None,
                cfg: VoxelConfig = VoxelConfig(),
                early_stop: bool = True) -> ViolationReport:
    report, _ = _violation_with_counts(scene, meshes, cfg, early_stop=early_stop)
    return report


def delta_vbl(before: Scene, after: Scene, meshes: MeshResolver | None = None,
              cfg: VoxelConfig = VoxelConfig()) -> float:
    """Change in normalized violation caused by inserting exactly one object."""
    if len(after.objects) != len(before.objects) + 1:
        raise NotSingleAddition("after must contain exactly one extra object")
    pool = list(after.objects)
    for obj in before.objects:
        try:
            pool.remove(obj)
        except ValueError:
            raise NotSingleAddition("after does not contain all objects of before")
    return compute_vbl(after, meshes, cfg).vbl_norm - compute_vbl(before, meshes, cfg).vbl_norm


# ---------------------------------------------------------------------------
# dataset validity filter

VBL_VALIDITY_MAX = 0.1
MIN_OBJECTS = 3
MAX_OBJECTS = 50


def validate_scene(scene: Scene, meshes: MeshResolver | None = None,
                   cfg: VoxelConfig = VoxelConfig()) -> SceneValidity:
    """Dataset validity filter: >= 4 boundary points, 3..50 objects, and
    normalized violation below 0.1 — with a single-object rescue when exactly
    one removal restores validity (lowest achieving index wins)."""
    try:
        check_bounds(scene.bounds_top, scene.bounds_bottom)
    except Exception:
        return SceneValidity(False, "bad_bounds")
    n = len(scene.objects)
    if not MIN_OBJECTS <= n <= MAX_OBJECTS:
        return SceneValidity(False, "object_count")
    report, counts = _violation_with_counts(scene, meshes, cfg)
    if report.vbl_norm < VBL_VALIDITY_MAX:
        return SceneValidity(True, "ok")
    if n - 1 >= MIN_OBJECTS:
        for i in range(n):
            oob_i = report.per_object_oob[i]
            mbl_i = sum(v for (m, k), v in report.per_pair_mbl.items() if i in (m, k))
            remaining = report.total_object_voxels - counts[i]
            vbl_left = report.vbl_voxels - oob_i - mbl_i
            norm_left = vbl_left / remaining if remaining else 0.0
            if norm_left < VBL_VALIDITY_MAX:
                return SceneValidity(True, "rescued", rescued_index=i)
    return SceneValidity(False, "vbl_exceeded")
