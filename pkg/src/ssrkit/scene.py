"""SSR scene model: parsing, serialization, validation, and transforms.

SSR documents are JSON files with keys ``room_type``, ``bounds_top``,
``bounds_bottom``, and ``objects``. Quaternions are stored as 4-lists in
(w, x, y, z) order; the y axis points up. Object ``pos`` is the bottom-center
of the object's axis-aligned bounding box before rotation.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import IndexOutOfRange, ParseError

log = logging.getLogger(__name__)

AXIS_TOL = 1e-4

ROOM_TYPES = ("bedroom", "livingroom", "other")

# Scene-level and object-level keys owned by the schema; everything else is
# preserved verbatim in an ``extra`` side map for round-tripping.
_SCENE_KEYS = ("room_type", "bounds_top", "bounds_bottom", "objects")
_OBJECT_REQUIRED = ("desc", "size", "pos", "rot")
_OBJECT_OPTIONAL = ("jid", "sampled_asset_jid", "sampled_asset_desc",
                    "sampled_asset_size", "uuid")


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for c in (self.x, self.y, self.z):
            if not math.isfinite(c):
                raise ParseError("invariant_violation", f"non-finite component in {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.z]

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion in (w, x, y, z) order, renormalized on construction."""

    w: float
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return math.sqrt(self.w ** 2 + self.x ** 2 + self.y ** 2 + self.z ** 2)

    def normalized(self) -> "Quaternion":
        n = self.norm()
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def canonical(self) -> "Quaternion":
        """Flip sign so the first nonzero component is positive (q and -q are
        the same rotation)."""
        for c in (self.w, self.x, self.y, self.z):
            if abs(c) > 1e-12:
                if c < 0:
                    return Quaternion(-self.w, -self.x, -self.y, -self.z)
                return self
        return self

    def compose(self, other: "Quaternion") -> "Quaternion":
        """Hamilton product self * other (apply ``other`` first)."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Quaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def rotation_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])

    def as_list(self) -> list[float]:
        return [self.w, self.x, self.y, self.z]

    @staticmethod
    def identity() -> "Quaternion":
        return Quaternion(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def yaw(angle_rad: float) -> "Quaternion":
        """Right-handed rotation about +y."""
        h = angle_rad / 2.0
        return Quaternion(math.cos(h), 0.0, math.sin(h), 0.0)


@dataclass(frozen=True)
class SceneObject:
    desc: str
    size: Vec3
    pos: Vec3
    rot: Quaternion
    jid: str | None = None
    sampled_asset_jid: str | None = None
    sampled_asset_desc: str | None = None
    sampled_asset_size: Vec3 | None = None
    uuid: str | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.desc:
            raise ParseError("invariant_violation", "object desc is empty")
        if min(self.size.x, self.size.y, self.size.z) <= 0:
            raise ParseError("invariant_violation",
                             f"object size must be positive, got {self.size.as_list()}")


@dataclass(frozen=True)
class Scene:
    room_type: str
    bounds_top: tuple[Vec3, ...]
    bounds_bottom: tuple[Vec3, ...]
    objects: tuple[SceneObject, ...]
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def floor_y(self) -> float:
        return self.bounds_bottom[0].y

    @property
    def ceiling_y(self) -> float:
        return self.bounds_top[0].y

    def floor_corners(self) -> np.ndarray:
        """(n, 2) array of the floor ring projected to the (x, z) plane."""
        return np.array([[b.x, b.z] for b in self.bounds_bottom])


@dataclass(frozen=True)
class SceneValidity:
    is_valid: bool
    reason: str  # ok | bad_bounds | object_count | vbl_exceeded | rescued
    rescued_index: int | None = None


# ---------------------------------------------------------------------------
# parsing / serialization

def _need(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ParseError("missing_key", f"required key {key!r} not found", path)
    return mapping[key]


def _parse_vec3(value, path: str) -> Vec3:
    if (not isinstance(value, (list, tuple)) or len(value) != 3
            or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in value)):
        raise ParseError("bad_type", "expected a 3-element numeric array", path)
    return Vec3(float(value[0]), float(value[1]), float(value[2]))


def _parse_quat(value, path: str) -> Quaternion:
    if (not isinstance(value, (list, tuple)) or len(value) != 4
            or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in value)):
        raise ParseError("bad_type", "expected a 4-element numeric array", path)
    q = Quaternion(float(value[0]), float(value[1]), float(value[2]), float(value[3]))
    if abs(q.norm() - 1.0) > 1e-3:
        raise ParseError("invariant_violation", f"quaternion norm {q.norm():.6f} too far from 1", path)
    return q.normalized()


def _parse_object(raw, path: str) -> SceneObject:
    if not isinstance(raw, dict):
        raise ParseError("bad_type", "object entry is not a dictionary", path)
    desc = _need(raw, "desc", path)
    if not isinstance(desc, str):
        raise ParseError("bad_type", "desc must be a string", f"{path}.desc")
    kwargs = {
        "desc": desc,
        "size": _parse_vec3(_need(raw, "size", path), f"{path}.size"),
        "pos": _parse_vec3(_need(raw, "pos", path), f"{path}.pos"),
        "rot": _parse_quat(_need(raw, "rot", path), f"{path}.rot"),
    }
    for key in ("jid", "sampled_asset_jid", "sampled_asset_desc", "uuid"):
        if key in raw:
            if not isinstance(raw[key], str):
                raise ParseError("bad_type", f"{key} must be a string", f"{path}.{key}")
            kwargs[key] = raw[key]
    if "sampled_asset_size" in raw:
        kwargs["sampled_asset_size"] = _parse_vec3(raw["sampled_asset_size"],
                                                   f"{path}.sampled_asset_size")
    extra = {k: v for k, v in raw.items()
             if k not in _OBJECT_REQUIRED and k not in _OBJECT_OPTIONAL}
    return SceneObject(extra=extra, **kwargs)


def check_bounds(bounds_top: tuple[Vec3, ...], bounds_bottom: tuple[Vec3, ...]):
    """Enforce the ring invariants: paired top/bottom rings on two y-planes
    whose 2D projection forms a closed rectilinear polygon."""
    if len(bounds_top) != len(bounds_bottom):
        raise ParseError("invariant_violation", "bounds_top and bounds_bottom differ in length")
    if len(bounds_bottom) < 4:
        raise ParseError("invariant_violation",
                         f"need at least 4 boundary points, got {len(bounds_bottom)}")
    y_floor = bounds_bottom[0].y
    y_ceil = bounds_top[0].y
    for i, (t, b) in enumerate(zip(bounds_top, bounds_bottom)):
        if abs(b.y - y_floor) > AXIS_TOL:
            raise ParseError("invariant_violation", f"bounds_bottom[{i}] off the floor plane")
        if abs(t.y - y_ceil) > AXIS_TOL:
            raise ParseError("invariant_violation", f"bounds_top[{i}] off the ceiling plane")
        if abs(t.x - b.x) > AXIS_TOL or abs(t.z - b.z) > AXIS_TOL:
            raise ParseError("invariant_violation", f"bounds_top[{i}] does not pair with bounds_bottom[{i}]")
    if y_ceil <= y_floor:
        raise ParseError("invariant_violation", "ceiling plane not above floor plane")
    n = len(bounds_bottom)
    for i in range(n):
        a = bounds_bottom[i]
        b = bounds_bottom[(i + 1) % n]
        dx, dz = abs(a.x - b.x), abs(a.z - b.z)
        if dx > AXIS_TOL and dz > AXIS_TOL:
            raise ParseError("invariant_violation",
                             f"floor edge {i} is not axis-aligned (dx={dx:.5f}, dz={dz:.5f})")


def parse_ssr(text: str) -> Scene:
    """Parse an SSR JSON document into a Scene.

    Unknown keys are kept in ``extra`` side maps so documents round-trip.
    """
    try:
        raw = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError("malformed_document", str(exc)) from exc
    if not isinstance(raw, dict):
        raise ParseError("malformed_document", "top-level value is not an object")

    room_type = _need(raw, "room_type", "$")
    if not isinstance(room_type, str):
        raise ParseError("bad_type", "room_type must be a string", "$.room_type")
    if room_type not in ROOM_TYPES:
        log.warning("unknown room_type %r, mapping to 'other'", room_type)
        room_type = "other"

    def parse_ring(key: str) -> tuple[Vec3, ...]:
        ring = _need(raw, key, "$")
        if not isinstance(ring, list):
            raise ParseError("bad_type", f"{key} must be an array", f"$.{key}")
        return tuple(_parse_vec3(p, f"$.{key}[{i}]") for i, p in enumerate(ring))

    bounds_top = parse_ring("bounds_top")
    bounds_bottom = parse_ring("bounds_bottom")
    check_bounds(bounds_top, bounds_bottom)

    raw_objects = _need(raw, "objects", "$")
    if not isinstance(raw_objects, list):
        raise ParseError("bad_type", "objects must be an array", "$.objects")
    objects = tuple(_parse_object(o, f"$.objects[{i}]") for i, o in enumerate(raw_objects))

    extra = {k: v for k, v in raw.items() if k not in _SCENE_KEYS}
    return Scene(room_type, bounds_top, bounds_bottom, objects, extra)


def _object_to_dict(obj: SceneObject) -> dict:
    out = {
        "desc": obj.desc,
        "size": obj.size.as_list(),
        "pos": obj.pos.as_list(),
        "rot": obj.rot.as_list(),
    }
    for key in _OBJECT_OPTIONAL:
        value = getattr(obj, key)
        if value is None:
            continue
        out[key] = value.as_list() if isinstance(value, Vec3) else value
    out.update(obj.extra)
    return out


def serialize_ssr(scene: Scene) -> str:
    """Emit the SSR schema with stable key order and round-trip-safe numbers."""
    doc = {
        "room_type": scene.room_type,
        "bounds_top": [b.as_list() for b in scene.bounds_top],
        "bounds_bottom": [b.as_list() for b in scene.bounds_bottom],
        "objects": [_object_to_dict(o) for o in scene.objects],
    }
    doc.update(scene.extra)
    return json.dumps(doc, indent=2)


# ---------------------------------------------------------------------------
# transforms

def polygon_centroid_2d(corners: np.ndarray) -> np.ndarray:
    """Area-weighted centroid of a simple polygon given as (n, 2) vertices."""
    x, z = corners[:, 0], corners[:, 1]
    xn, zn = np.roll(x, -1), np.roll(z, -1)
    cross = x * zn - xn * z
    area2 = cross.sum()
    cx = ((x + xn) * cross).sum() / (3.0 * area2)
    cz = ((z + zn) * cross).sum() / (3.0 * area2)
    return np.array([cx, cz])


def translate_scene(scene: Scene, offset: Vec3) -> Scene:
    def shift(p: Vec3) -> Vec3:
        return p + offset

    objects = tuple(replace(o, pos=shift(o.pos)) for o in scene.objects)
    return replace(scene,
                   bounds_top=tuple(shift(p) for p in scene.bounds_top),
                   bounds_bottom=tuple(shift(p) for p in scene.bounds_bottom),
                   objects=objects)


def translate_to_origin(scene: Scene) -> Scene:
    """Move the floor polygon's centroid to (0, ., 0) and the floor to y=0."""
    cx, cz = polygon_centroid_2d(scene.floor_corners())
    return translate_scene(scene, Vec3(-cx, -scene.floor_y, -cz))


def add_object(scene: Scene, obj: SceneObject) -> Scene:
    return replace(scene, objects=scene.objects + (obj,))


def remove_objects(scene: Scene, indices: list[int]) -> Scene:
    n = len(scene.objects)
    seen = set()
    for i in indices:
        if not 0 <= i < n:
            raise IndexOutOfRange(f"object index {i} out of range for {n} objects")
        if i in seen:
            raise IndexOutOfRange(f"duplicate object index {i}")
        seen.add(i)
    return replace(scene, objects=tuple(o for i, o in enumerate(scene.objects)
                                        if i not in seen))


_YAW_STEPS = {0: (1.0, 0.0), 1: (0.0, 1.0), 2: (-1.0, 0.0), 3: (0.0, -1.0)}


def apply_augmentation(scene: Scene, theta_steps: int, shift: int,
                       deltas: np.ndarray | None) -> Scene:
    """Deterministic core of :func:`augment`.

    ``theta_steps`` counts 90-degree right-handed turns about +y through the
    origin; ``shift`` cyclically rotates both bound rings; ``deltas`` is an
    (n_objects, 4) array of perturbations for (pos.x, pos.z, size.x, size.z),
    or None for no perturbation.
    """
    theta_steps %= 4
    cos_t, sin_t = _YAW_STEPS[theta_steps]

    def rot_xz(p: Vec3) -> Vec3:
        return Vec3(p.x * cos_t + p.z * sin_t, p.y, -p.x * sin_t + p.z * cos_t)

    n = len(scene.bounds_bottom)
    shift %= n
    order = [(i + shift) % n for i in range(n)]
    bounds_top = tuple(rot_xz(scene.bounds_top[i]) for i in order)
    bounds_bottom = tuple(rot_xz(scene.bounds_bottom[i]) for i in order)

    q_turn = Quaternion.yaw(math.pi / 2.0 * theta_steps) if theta_steps else None
    objects = []
    for i, obj in enumerate(scene.objects):
        pos = rot_xz(obj.pos)
        rot = q_turn.compose(obj.rot).canonical() if q_turn else obj.rot
        size = obj.size
        if deltas is not None:
            dpx, dpz, dsx, dsz = deltas[i]
            pos = Vec3(pos.x + dpx, pos.y, pos.z + dpz)
            size = Vec3(size.x + dsx, size.y, size.z + dsz)
        objects.append(replace(obj, pos=pos, size=size, rot=rot))
    return replace(scene, bounds_top=bounds_top, bounds_bottom=bounds_bottom,
                   objects=tuple(objects))


def augment(scene: Scene, seed) -> Scene:
    """Random augmentation: yaw by a multiple of 90 degrees, cyclic shift of
    the bound rings, and a U(-0.02, 0.02) jitter on every object's pos/size
    x- and z-components.

    Draw order from the PCG64 stream: theta index, ring shift, then per object
    (dpos_x, dpos_z, dsize_x, dsize_z).
    """
    rng = np.random.default_rng(seed)
    theta_steps = int(rng.integers(0, 4))
    shift = int(rng.integers(0, len(scene.bounds_bottom)))
    deltas = rng.uniform(-0.02, 0.02, size=(len(scene.objects), 4))
    return apply_augmentation(scene, theta_steps, shift, deltas)
