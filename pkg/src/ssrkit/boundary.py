"""Rectilinear floor boundaries: corner extraction from meshes, polygon
queries, and the watertight prism used for voxelization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MultipleLoops, NotRectilinear, OpenBoundary, SsrkitError
from .scene import AXIS_TOL, Scene


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray   # (n, 3) float
    triangles: np.ndarray  # (m, 3) int

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles, dtype=int)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t.reshape(-1, 3))
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise SsrkitError("triangle index out of range")

    def triangle_vertices(self) -> np.ndarray:
        """(m, 3, 3) array of triangle corner coordinates."""
        return self.vertices[self.triangles]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def drop_degenerate(self, eps: float = 1e-12) -> "TriangleMesh":
        tri = self.triangle_vertices()
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        area2 = np.linalg.norm(cross, axis=1)
        return TriangleMesh(self.vertices, self.triangles[area2 > eps])

    def is_watertight(self) -> bool:
        """Every undirected edge is used by exactly two triangles."""
        edges = {}
        for a, b, c in self.triangles:
            for e in ((a, b), (b, c), (c, a)):
                key = (min(e), max(e))
                edges[key] = edges.get(key, 0) + 1
        return all(count == 2 for count in edges.values())


@dataclass(frozen=True)
class RectilinearPolygon:
    """Closed simple polygon with axis-aligned edges in the (x, z) plane."""

    corners: np.ndarray  # (n, 2) float, ordered, no collinear runs
    y_floor: float
    y_ceiling: float

    def __post_init__(self):
        c = np.asarray(self.corners, dtype=float)
        object.__setattr__(self, "corners", c)
        n = len(c)
        if n < 4:
            raise NotRectilinear(f"need at least 4 corners, got {n}")
        for i in range(n):
            a, b = c[i], c[(i + 1) % n]
            dx, dz = abs(a[0] - b[0]), abs(a[1] - b[1])
            if dx <= AXIS_TOL and dz <= AXIS_TOL:
                raise NotRectilinear(f"zero-length edge at corner {i}")
            if dx > AXIS_TOL and dz > AXIS_TOL:
                raise NotRectilinear(f"edge {i} not axis-aligned")


def load_obj(path) -> TriangleMesh:
    """Load a Wavefront OBJ keeping only vertices and faces; faces with more
    than three vertices are fan-triangulated."""
    vertices: list[list[float]] = []
    triangles: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                vertices.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                idx = [i - 1 if i > 0 else len(vertices) + i for i in idx]
                for k in range(1, len(idx) - 1):
                    triangles.append([idx[0], idx[k], idx[k + 1]])
    if not vertices or not triangles:
        raise SsrkitError(f"no triangle geometry in {path}")
    return TriangleMesh(np.array(vertices), np.array(triangles)).drop_degenerate()


# ---------------------------------------------------------------------------
# corner extraction

def _floor_triangles(mesh: TriangleMesh) -> tuple[np.ndarray, float, float]:
    """Return (floor triangle array, y_floor, y_top). The floor is the set of
    horizontal triangles on the lowest shared y-plane."""
    tri = mesh.triangle_vertices()
    ys = tri[:, :, 1]
    horizontal = (ys.max(axis=1) - ys.min(axis=1)) <= AXIS_TOL
    if not horizontal.any():
        raise OpenBoundary("mesh has no horizontal faces")
    y_floor = ys[horizontal].min()
    on_floor = horizontal & (np.abs(ys.mean(axis=1) - y_floor) <= AXIS_TOL)
    return mesh.triangles[on_floor], float(y_floor), float(mesh.vertices[:, 1].max())


def _chain_boundary(floor_tris: np.ndarray) -> list[list[int]]:
    """Chain boundary edges (used by exactly one floor triangle) into loops of
    vertex indices."""
    counts: dict[tuple[int, int], int] = {}
    directed: dict[tuple[int, int], tuple[int, int]] = {}
    for a, b, c in floor_tris:
        for e in ((a, b), (b, c), (c, a)):
            key = (min(e), max(e))
            counts[key] = counts.get(key, 0) + 1
            directed[key] = (int(e[0]), int(e[1]))
    boundary = [directed[k] for k, n in counts.items() if n == 1]
    if not boundary:
        raise OpenBoundary("floor has no boundary edges")

    succ: dict[int, int] = {}
    for a, b in boundary:
        if a in succ:
            raise MultipleLoops("boundary edges branch; holes are unsupported")
        succ[a] = b
    loops: list[list[int]] = []
    remaining = set(succ)
    while remaining:
        start = min(remaining)
        loop = [start]
        remaining.discard(start)
        cur = succ.get(start)
        while cur is not None and cur != start:
            if cur not in remaining:
                raise OpenBoundary("boundary edges do not close into a loop")
            loop.append(cur)
            remaining.discard(cur)
            cur = succ.get(cur)
        if cur != start:
            raise OpenBoundary("boundary edges do not close into a loop")
        loops.append(loop)
    return loops


def _collapse_collinear(points: np.ndarray) -> np.ndarray:
    """Drop vertices lying on a straight axis-aligned run."""
    keep = []
    n = len(points)
    for i in range(n):
        prev_pt = points[(i - 1) % n]
        next_pt = points[(i + 1) % n]
        v1 = points[i] - prev_pt
        v2 = next_pt - points[i]
        # both edges along the same axis => not a corner
        same_x = abs(v1[0]) <= AXIS_TOL and abs(v2[0]) <= AXIS_TOL
        same_z = abs(v1[1]) <= AXIS_TOL and abs(v2[1]) <= AXIS_TOL
        if not (same_x or same_z):
            keep.append(i)
    return points[keep]


def _snap_axes(points: np.ndarray) -> np.ndarray:
    """Force exact axis alignment by averaging near-equal coordinates along
    each edge; raises NotRectilinear if an edge deviates beyond tolerance."""
    pts = points.copy()
    n = len(pts)
    for i in range(n):
        j = (i + 1) % n
        dx = abs(pts[i, 0] - pts[j, 0])
        dz = abs(pts[i, 1] - pts[j, 1])
        if dx <= AXIS_TOL:
            mid = 0.5 * (pts[i, 0] + pts[j, 0])
            pts[i, 0] = pts[j, 0] = mid
        elif dz <= AXIS_TOL:
            mid = 0.5 * (pts[i, 1] + pts[j, 1])
            pts[i, 1] = pts[j, 1] = mid
        else:
            raise NotRectilinear(f"boundary edge {i} deviates from axis alignment")
    return pts


def _orient_and_anchor(points: np.ndarray) -> np.ndarray:
    """Positive shoelace orientation, starting at min-x (ties by min-z)."""
    x, z = points[:, 0], points[:, 1]
    area2 = (x * np.roll(z, -1) - np.roll(x, -1) * z).sum()
    if area2 < 0:
        points = points[::-1]
    start = min(range(len(points)), key=lambda i: (points[i, 0], points[i, 1]))
    return np.roll(points, -start, axis=0)


def extract_corners(mesh: TriangleMesh) -> RectilinearPolygon:
    """Recover the ordered rectilinear corner polygon of a floor mesh.

    Boundary edges of the floor faces are chained into a single closed loop,
    snapped to the axes, and collinear intermediate vertices are collapsed, so
    the result is independent of how the floor happens to be triangulated.
    """
    floor_tris, y_floor, y_top = _floor_triangles(mesh)
    loops = _chain_boundary(floor_tris)
    if len(loops) > 1:
        raise MultipleLoops(f"floor boundary has {len(loops)} loops; holes are unsupported")
    pts = mesh.vertices[loops[0]][:, [0, 2]]
    pts = _snap_axes(pts)
    pts = _collapse_collinear(pts)
    pts = _orient_and_anchor(pts)
    y_ceiling = y_top if y_top > y_floor + AXIS_TOL else y_floor
    return RectilinearPolygon(pts, y_floor, y_ceiling)


def polygon_from_scene(scene: Scene) -> RectilinearPolygon:
    return RectilinearPolygon(scene.floor_corners(), scene.floor_y, scene.ceiling_y)


# ---------------------------------------------------------------------------
# polygon queries

def polygon_area(poly: RectilinearPolygon) -> float:
    x, z = poly.corners[:, 0], poly.corners[:, 1]
    return abs((x * np.roll(z, -1) - np.roll(x, -1) * z).sum()) / 2.0


def point_in_polygon(poly: RectilinearPolygon, point) -> bool:
    """Closed-region containment: boundary points count as inside."""
    px, pz = float(point[0]), float(point[1])
    corners = poly.corners
    n = len(corners)
    inside = False
    for i in range(n):
        x1, z1 = corners[i]
        x2, z2 = corners[(i + 1) % n]
        # on-edge check (axis-aligned edges only)
        if (min(x1, x2) - AXIS_TOL <= px <= max(x1, x2) + AXIS_TOL
                and min(z1, z2) - AXIS_TOL <= pz <= max(z1, z2) + AXIS_TOL
                and (abs(x1 - x2) <= AXIS_TOL or abs(z1 - z2) <= AXIS_TOL)):
            if abs(x1 - x2) <= AXIS_TOL and abs(px - x1) <= AXIS_TOL:
                return True
            if abs(z1 - z2) <= AXIS_TOL and abs(pz - z1) <= AXIS_TOL:
                return True
        if (z1 > pz) != (z2 > pz):
            x_cross = x1 + (pz - z1) * (x2 - x1) / (z2 - z1)
            if px < x_cross:
                inside = not inside
    return inside


# ---------------------------------------------------------------------------
# extrusion

def _ear_clip(corners: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a simple CCW polygon by ear clipping."""

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def in_triangle(p, a, b, c):
        d1, d2, d3 = cross(a, b, p), cross(b, c, p), cross(c, a, p)
        return d1 >= -1e-12 and d2 >= -1e-12 and d3 >= -1e-12

    idx = list(range(len(corners)))
    tris: list[tuple[int, int, int]] = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10000:
            raise NotRectilinear("ear clipping failed; polygon may self-intersect")
        n = len(idx)
        clipped = False
        for k in range(n):
            i0, i1, i2 = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
            a, b, c = corners[i0], corners[i1], corners[i2]
            if cross(a, b, c) <= 1e-12:
                continue  # reflex or degenerate corner
            if any(in_triangle(corners[j], a, b, c)
                   for j in idx if j not in (i0, i1, i2)):
                continue
            tris.append((i0, i1, i2))
            idx.pop(k)
            clipped = True
            break
        if not clipped:
            raise NotRectilinear("ear clipping found no ear; polygon may self-intersect")
    tris.append((idx[0], idx[1], idx[2]))
    return tris


def extrude_boundary_mesh(poly: RectilinearPolygon) -> TriangleMesh:
    """Watertight prism between y_floor and y_ceiling with outward winding."""
    if poly.y_ceiling <= poly.y_floor:
        raise SsrkitError("cannot extrude a polygon with non-positive height")
    corners = _orient_and_anchor(poly.corners)  # ensure CCW for ear clipping
    n = len(corners)
    floor = np.column_stack([corners[:, 0], np.full(n, poly.y_floor), corners[:, 1]])
    ceil = np.column_stack([corners[:, 0], np.full(n, poly.y_ceiling), corners[:, 1]])
    vertices = np.vstack([floor, ceil])

    # with y up, positive-shoelace order in (x, z) yields a -y facing normal,
    # so the fan triangles serve as the floor directly
    fan = _ear_clip(corners)
    triangles = []
    for a, b, c in fan:
        triangles.append([a, b, c])              # floor faces down
        triangles.append([n + a, n + c, n + b])  # ceiling faces up
    for i in range(n):
        j = (i + 1) % n
        # side quad split into two triangles, outward winding
        triangles.append([i, n + j, j])
        triangles.append([i, n + i, n + j])
    return TriangleMesh(vertices, np.array(triangles))
