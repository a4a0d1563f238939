"""Geometric and sensor domain types shared by the whole pipeline.

Ego frame: x forward, y left, z up, metres. The radar lives in the ground
plane (2D); the camera has its own right-handed frame related to the ego
frame by a rigid transform.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Bad parameters or mismatched inputs handed to an operation."""


class ValidationError(ValueError):
    """A domain object violates one of its invariants."""


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValidationError(f"{name} has non-finite component {v!r}")


class _Point2(NamedTuple):
    x: float
    y: float


class Point2(_Point2):
    """Ground-plane point in the ego frame."""

    __slots__ = ()

    def __new__(cls, x: float, y: float) -> "Point2":
        x, y = float(x), float(y)
        _require_finite("Point2", x, y)
        return super().__new__(cls, x, y)

    def __add__(self, other):  # type: ignore[override]
        return Point2(self.x + other[0], self.y + other[1])

    def __sub__(self, other) -> "Point2":
        return Point2(self.x - other[0], self.y - other[1])

    def scaled(self, s: float) -> "Point2":
        return Point2(self.x * s, self.y * s)

    def dot(self, other) -> float:
        return self.x * other[0] + self.y * other[1]

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def distance(self, other) -> float:
        return math.hypot(self.x - other[0], self.y - other[1])


class _Point3(NamedTuple):
    x: float
    y: float
    z: float


class Point3(_Point3):
    """Point in a 3D frame (camera or ego)."""

    __slots__ = ()

    def __new__(cls, x: float, y: float, z: float) -> "Point3":
        x, y, z = float(x), float(y), float(z)
        _require_finite("Point3", x, y, z)
        return super().__new__(cls, x, y, z)


class Motion(enum.Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


class Visibility(enum.Enum):
    """How much of a pedestrian the camera can see."""

    NLOS = "nlos"
    PARTIAL = "partial"
    FULL = "full"


@dataclass(frozen=True)
class RadarPoint:
    position: Point2
    motion: Motion
    id: int

    def __post_init__(self) -> None:
        if not isinstance(self.position, Point2):
            object.__setattr__(self, "position", Point2(*self.position))
        if not isinstance(self.motion, Motion):
            object.__setattr__(self, "motion", Motion(self.motion))


@dataclass(frozen=True)
class RadarFrame:
    """All radar returns of one sweep; the motion tag splits it into static and dynamic parts."""

    timestamp: float
    points: tuple[RadarPoint, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))
        _require_finite("RadarFrame.timestamp", self.timestamp)
        ids = [p.id for p in self.points]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate point ids in frame at t={self.timestamp}")

    def static(self) -> list[RadarPoint]:
        return [p for p in self.points if p.motion is Motion.STATIC]

    def dynamic(self) -> list[RadarPoint]:
        return [p for p in self.points if p.motion is Motion.DYNAMIC]

    def partition(self) -> tuple[list[RadarPoint], list[RadarPoint]]:
        return self.static(), self.dynamic()


def validate_sequence(frames: Sequence[RadarFrame]) -> None:
    """Raise unless timestamps are strictly increasing."""
    for prev, cur in zip(frames, frames[1:]):
        if not cur.timestamp > prev.timestamp:
            raise ValidationError(
                f"timestamps not strictly increasing: {prev.timestamp} then {cur.timestamp}"
            )


@dataclass(frozen=True)
class LineSeg:
    a: Point2
    b: Point2

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", Point2(*self.a))
        object.__setattr__(self, "b", Point2(*self.b))
        if self.a.distance(self.b) <= 1e-9:
            raise ValidationError(f"degenerate segment {self.a} -> {self.b}")

    @property
    def direction(self) -> Point2:
        return self.b - self.a

    @property
    def length(self) -> float:
        return self.a.distance(self.b)

    def slope_intercept(self) -> tuple[float, float] | None:
        """(alpha, beta) of y = alpha*x + beta, or None for a vertical line."""
        dx, dy = self.b.x - self.a.x, self.b.y - self.a.y
        if abs(dx) <= 1e-12 * max(1.0, abs(dy)):
            return None
        alpha = dy / dx
        return alpha, self.a.y - alpha * self.a.x


@dataclass(frozen=True)
class AlignedBox:
    """Axis-aligned vehicle footprint; width spans x, length spans y."""

    center: Point2
    width: float
    length: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", Point2(*self.center))
        _require_finite("AlignedBox", self.width, self.length)
        if self.width <= 0 or self.length <= 0:
            raise ValidationError(
                f"box extents must be positive, got width={self.width} length={self.length}"
            )

    @classmethod
    def from_bounds(cls, x_min: float, y_min: float, x_max: float, y_max: float) -> "AlignedBox":
        return cls(Point2((x_min + x_max) / 2, (y_min + y_max) / 2), x_max - x_min, y_max - y_min)

    @property
    def x_min(self) -> float:
        return self.center.x - self.width / 2

    @property
    def x_max(self) -> float:
        return self.center.x + self.width / 2

    @property
    def y_min(self) -> float:
        return self.center.y - self.length / 2

    @property
    def y_max(self) -> float:
        return self.center.y + self.length / 2

    @property
    def area(self) -> float:
        return self.width * self.length

    def corners(self) -> tuple[Point2, Point2, Point2, Point2]:
        """Counter-clockwise from (x_min, y_min)."""
        return (
            Point2(self.x_min, self.y_min),
            Point2(self.x_max, self.y_min),
            Point2(self.x_max, self.y_max),
            Point2(self.x_min, self.y_max),
        )

    def contains(self, p, margin: float = 0.0) -> bool:
        return (
            abs(p[0] - self.center.x) <= self.width / 2 + margin
            and abs(p[1] - self.center.y) <= self.length / 2 + margin
        )

    def moved(self, dx: float, dy: float) -> "AlignedBox":
        return AlignedBox(Point2(self.center.x + dx, self.center.y + dy), self.width, self.length)

    def overlaps(self, other: "AlignedBox") -> bool:
        return (
            self.x_min < other.x_max
            and other.x_min < self.x_max
            and self.y_min < other.y_max
            and other.y_min < self.y_max
        )


def box_edges(b: AlignedBox) -> tuple[LineSeg, LineSeg, LineSeg, LineSeg]:
    """Edges in a fixed order: bottom (y_min), right (x_max), top (y_max), left (x_min).

    The order doubles as the corner tie-break index used by ray casting.
    """
    c0, c1, c2, c3 = b.corners()
    return LineSeg(c0, c1), LineSeg(c1, c2), LineSeg(c2, c3), LineSeg(c3, c0)


def edge_outward_normal(index: int) -> Point2:
    return (Point2(0, -1), Point2(1, 0), Point2(0, 1), Point2(-1, 0))[index]


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        _require_finite("CameraIntrinsics", self.fx, self.fy, self.cx, self.cy)
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValidationError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image"
            )

    @classmethod
    def from_fov(cls, width: int, height: int, hfov_deg: float) -> "CameraIntrinsics":
        f = (width / 2) / math.tan(math.radians(hfov_deg) / 2)
        return cls(f, f, (width - 1) / 2, (height - 1) / 2, width, height)

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class DepthGrid:
    """Row-major metric depth along the optical axis; values <= 0 are invalid."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.size != self.width * self.height:
            raise ConfigurationError(
                f"depth has {v.size} values, expected {self.width}x{self.height}"
            )
        object.__setattr__(self, "values", v.reshape(self.height, self.width))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DepthGrid)
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class SegMask:
    width: int
    height: int
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values)
        if v.size != self.width * self.height:
            raise ConfigurationError(
                f"mask has {v.size} values, expected {self.width}x{self.height}"
            )
        if v.size and not np.isin(v, (0, 1)).all():
            raise ValidationError("mask values must be 0 or 1")
        object.__setattr__(self, "values", v.reshape(self.height, self.width).astype(np.uint8))

    @classmethod
    def empty(cls, width: int, height: int) -> "SegMask":
        return cls(width, height, np.zeros((height, width), dtype=np.uint8))

    def __eq__(self, other) -> bool:
        return isinstance(other, SegMask) and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Maps ego coordinates to camera coordinates: p_cam = R @ p_ego + t."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9) or np.linalg.det(r) < 0:
            raise ConfigurationError("rotation is not a proper orthonormal matrix")
        if not np.isfinite(t).all():
            raise ConfigurationError("translation has non-finite components")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def yaw(cls, angle_rad: float) -> "RigidTransform":
        c, s = math.cos(angle_rad), math.sin(angle_rad)
        return cls(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]))

    @classmethod
    def forward_camera(cls, position: Iterable[float], yaw_rad: float = 0.0) -> "RigidTransform":
        """Pinhole camera at `position` (ego frame) looking along heading `yaw_rad`.

        Camera axes follow the usual optical convention: x right, y down, z forward.
        """
        c, s = math.cos(yaw_rad), math.sin(yaw_rad)
        rot = np.array(
            [
                [s, -c, 0.0],  # camera x: to the right of the heading
                [0.0, 0.0, -1.0],  # camera y: down
                [c, s, 0.0],  # camera z: along the heading
            ]
        )
        pos = np.asarray(list(position), dtype=float)
        return cls(rot, -rot @ pos)

    @property
    def camera_position(self) -> np.ndarray:
        """Camera centre expressed in the ego frame."""
        return -self.rotation.T @ self.translation

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, dtype=float) @ self.rotation.T + self.translation

    def apply_inverse(self, pts: np.ndarray) -> np.ndarray:
        return (np.asarray(pts, dtype=float) - self.translation) @ self.rotation

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RigidTransform)
            and np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )

    def __hash__(self) -> int:
        return hash((self.rotation.tobytes(), self.translation.tobytes()))


def ego_to_camera(p, extrinsics: RigidTransform) -> Point3:
    """Lift a ground-plane point (z = 0) into the camera frame."""
    z = p[2] if len(p) > 2 else 0.0
    out = extrinsics.apply(np.array([p[0], p[1], z]))
    return Point3(*out)


def camera_to_ego(p, extrinsics: RigidTransform) -> Point3:
    return Point3(*extrinsics.apply_inverse(np.array([p[0], p[1], p[2]])))


def as_xy(points) -> np.ndarray:
    """Coerce a collection of 2D points into an (N, 2) float array."""
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 2))
    return arr.reshape(-1, 2)
