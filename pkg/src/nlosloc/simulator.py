"""Forward model: radar returns, depth and vehicle mask from a ground-truth scene.

Static returns are sampled along vehicle edges the radar can see. Each
pedestrian yields direct returns when in line of sight and first-order
specular returns off every vehicle edge that admits a valid bounce; the
specular return is reported at the mirrored (apparent) position. Depth is a
per-pixel ray cast of the vehicles (extruded boxes) and pedestrians
(cylinders) from the camera.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .core import (
    AlignedBox,
    CameraIntrinsics,
    DepthGrid,
    Motion,
    Point2,
    RadarFrame,
    RadarPoint,
    RigidTransform,
    SegMask,
    ValidationError,
    Visibility,
    box_edges,
    edge_outward_normal,
)
from .reflection import Structures, first_hit, mirror_point, segment_blocked


@dataclass(frozen=True)
class NoiseSpec:
    radar_range_sigma: float = 0.0  # m
    radar_angle_sigma: float = 0.0  # rad
    depth_sigma_rel: float = 0.0  # per-vehicle depth scale error, fraction
    depth_pixel_sigma_rel: float = 0.0  # independent per-pixel depth error, fraction
    static_clutter_rate: float = 0.0  # Poisson mean per frame
    dynamic_clutter_rate: float = 0.0
    dropout_prob: float = 0.0

    def __post_init__(self) -> None:
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"noise.{name} must be finite and non-negative, got {v}")
        if self.dropout_prob > 1:
            raise ValidationError("noise.dropout_prob must lie in [0, 1]")


ZERO_NOISE = NoiseSpec()
NOMINAL_NOISE = NoiseSpec(
    radar_range_sigma=0.05,
    radar_angle_sigma=math.radians(0.5),
    depth_sigma_rel=0.03,
    static_clutter_rate=2.0,
    dynamic_clutter_rate=2.0,
)


@dataclass(frozen=True)
class Vehicle:
    name: str
    box: AlignedBox


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear walk at constant speed, present from start_time until the last waypoint."""

    ped_id: str
    waypoints: tuple[Point2, ...]
    speed: float
    start_time: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "waypoints", tuple(Point2(*w) for w in self.waypoints))
        if len(self.waypoints) < 2:
            raise ValidationError(f"pedestrian {self.ped_id}: need at least two waypoints")
        if not self.speed > 0:
            raise ValidationError(f"pedestrian {self.ped_id}: speed must be positive")

    @property
    def times(self) -> tuple[float, ...]:
        out = [self.start_time]
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            out.append(out[-1] + a.distance(b) / self.speed)
        return tuple(out)

    @property
    def end_time(self) -> float:
        return self.times[-1]

    def position(self, t: float) -> Point2 | None:
        times = self.times
        if t < times[0] or t > times[-1]:
            return None
        for (t0, t1), (a, b) in zip(zip(times, times[1:]), zip(self.waypoints, self.waypoints[1:])):
            if t <= t1:
                f = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
                return Point2(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y))
        return self.waypoints[-1]


@dataclass(frozen=True)
class CameraRig:
    intrinsics: CameraIntrinsics
    extrinsics: RigidTransform

    @property
    def position(self) -> np.ndarray:
        return self.extrinsics.camera_position

    @property
    def hfov(self) -> float:
        k = self.intrinsics
        return math.atan(max(k.cx, k.width - 1 - k.cx) / k.fx)


@dataclass(frozen=True)
class Scenario:
    name: str
    ego_origin: Point2
    vehicles: tuple[Vehicle, ...]
    pedestrians: tuple[Trajectory, ...]
    camera: CameraRig
    frame_rate: float = 10.0
    duration: float = 5.0
    noise: NoiseSpec = ZERO_NOISE
    seed: int = 0
    returns_per_path: int = 4
    static_spacing: float = 0.25
    vehicle_height: float = 1.5
    ped_radius: float = 0.25
    ped_height: float = 1.7
    clutter_region: tuple[float, float, float, float] = (0.0, -4.0, 16.0, 10.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "vehicles", tuple(self.vehicles))
        object.__setattr__(self, "pedestrians", tuple(self.pedestrians))
        object.__setattr__(self, "ego_origin", Point2(*self.ego_origin))
        self.validate()

    def validate(self) -> None:
        if not self.duration > 0:
            raise ValidationError("duration must be positive")
        if not self.frame_rate > 0:
            raise ValidationError("frame_rate must be positive")
        if self.returns_per_path < 1 or not self.static_spacing > 0:
            raise ValidationError("returns_per_path must be >= 1 and static_spacing > 0")
        names = [v.name for v in self.vehicles]
        if len(set(names)) != len(names):
            raise ValidationError("vehicle names must be unique")
        for i, a in enumerate(self.vehicles):
            for b in self.vehicles[i + 1 :]:
                if a.box.overlaps(b.box):
                    raise ValidationError(f"vehicles {a.name} and {b.name} overlap")
            if a.box.contains(self.ego_origin):
                raise ValidationError(f"ego origin lies inside vehicle {a.name}")
        ids = [p.ped_id for p in self.pedestrians]
        if len(set(ids)) != len(ids):
            raise ValidationError("pedestrian ids must be unique")
        structures = Structures([v.box for v in self.vehicles])
        for ped in self.pedestrians:
            for w in ped.waypoints:
                for v in self.vehicles:
                    if v.box.contains(w):
                        raise ValidationError(
                            f"pedestrian {ped.ped_id} waypoint ({w.x}, {w.y}) lies inside vehicle {v.name}"
                        )
            for a, b in zip(ped.waypoints, ped.waypoints[1:]):
                if segment_blocked(a, b, structures):
                    raise ValidationError(f"pedestrian {ped.ped_id} walks through a vehicle")

    @property
    def boxes(self) -> list[AlignedBox]:
        return [v.box for v in self.vehicles]

    def frame_times(self) -> list[float]:
        n = int(math.floor(self.duration * self.frame_rate + 1e-9))
        return [k / self.frame_rate for k in range(n + 1)]


# -- ground truth -------------------------------------------------------------


class PointKind(enum.Enum):
    REFLECTOR = "reflector"
    STATIC_CLUTTER = "static_clutter"
    TARGET = "target"
    DYNAMIC_CLUTTER = "dynamic_clutter"


@dataclass(frozen=True)
class PointLabel:
    kind: PointKind
    ped_id: str | None = None
    path: str | None = None  # "direct" or "reflected"
    vehicle: str | None = None
    edge_index: int | None = None


@dataclass(frozen=True)
class PedestrianTruth:
    ped_id: str
    position: Point2
    visibility: Visibility
    radar_los: bool


@dataclass(frozen=True)
class TruthSnapshot:
    t: float
    pedestrians: tuple[PedestrianTruth, ...]
    vehicles: tuple[Vehicle, ...]
    labels: dict = field(default_factory=dict)  # radar point id -> PointLabel


@dataclass(frozen=True)
class SimFrame:
    index: int
    radar: RadarFrame
    depth: DepthGrid
    mask: SegMask
    truth: TruthSnapshot


def camera_visibility(scenario: Scenario, p: Point2, samples: int = 17) -> Visibility:
    """How much of a pedestrian disc the camera sees past the vehicles.

    The disc silhouette is sampled along the diameter perpendicular to the
    viewing direction.
    """
    cam = scenario.camera
    cpos = cam.position
    c = Point2(cpos[0], cpos[1])
    view = p - c
    dist = view.norm()
    if dist <= scenario.ped_radius:
        return Visibility.FULL
    perp = Point2(-view.y / dist, view.x / dist)
    heading = np.arctan2(*cam.extrinsics.rotation[2, [1, 0]])
    structures = Structures(scenario.boxes)
    seen = []
    for s in np.linspace(-1.0, 1.0, samples):
        q = p + perp.scaled(s * scenario.ped_radius)
        ang = math.atan2(q.y - c.y, q.x - c.x) - heading
        ang = (ang + math.pi) % (2 * math.pi) - math.pi
        in_fov = abs(ang) <= cam.hfov
        seen.append(in_fov and not segment_blocked(c, q, structures))
    if all(seen):
        return Visibility.FULL
    if any(seen):
        return Visibility.PARTIAL
    return Visibility.NLOS


# -- radar -------------------------------------------------------------------


def _jitter(p: Point2, origin: Point2, noise: NoiseSpec, rng: np.random.Generator) -> Point2:
    if noise.radar_range_sigma == 0 and noise.radar_angle_sigma == 0:
        return p
    dx, dy = p.x - origin.x, p.y - origin.y
    r = math.hypot(dx, dy) + rng.normal(0.0, noise.radar_range_sigma)
    a = math.atan2(dy, dx) + rng.normal(0.0, noise.radar_angle_sigma)
    return Point2(origin.x + r * math.cos(a), origin.y + r * math.sin(a))


def static_returns(scenario: Scenario, density: float = 1.0) -> list[tuple[Point2, PointLabel]]:
    """Noise-free samples on vehicle edges that face the radar and are not shadowed."""
    o = scenario.ego_origin
    structures = Structures(scenario.boxes)
    out = []
    for v in scenario.vehicles:
        for k, edge in enumerate(box_edges(v.box)):
            normal = edge_outward_normal(k)
            mid = Point2((edge.a.x + edge.b.x) / 2, (edge.a.y + edge.b.y) / 2)
            if normal.dot(o - mid) <= 0:
                continue
            n = max(1, int(round(edge.length / scenario.static_spacing * density)))
            for m in range(n):
                f = (m + 0.5) / n
                p = Point2(edge.a.x + f * (edge.b.x - edge.a.x), edge.a.y + f * (edge.b.y - edge.a.y))
                if not segment_blocked(o, p, structures):
                    out.append((p, PointLabel(PointKind.REFLECTOR, vehicle=v.name, edge_index=k)))
    return out


def specular_paths(scenario: Scenario, ped: Point2) -> list[tuple[Point2, Point2, str, int]]:
    """First-order bounces (apparent point, bounce point, vehicle name, edge index) reaching `ped`."""
    o = scenario.ego_origin
    structures = Structures(scenario.boxes)
    out = []
    for bi, v in enumerate(scenario.vehicles):
        for k, edge in enumerate(box_edges(v.box)):
            normal = edge_outward_normal(k)
            if normal.dot(o - edge.a) <= 0 or normal.dot(ped - edge.a) <= 0:
                continue
            image = mirror_point(ped, edge)
            hit = first_hit(o, image, structures)
            if hit is None or (hit.box_index, hit.edge_index) != (bi, k):
                continue
            if segment_blocked(hit.point, ped, structures):
                continue
            out.append((image, hit.point, v.name, k))
    return out


class FrameStreams(NamedTuple):
    """Independent random streams per noise source, so changing one (say the
    static sampling density) leaves the draws of the others untouched."""

    static: np.random.Generator
    dynamic: np.random.Generator
    clutter: np.random.Generator
    camera: np.random.Generator


def frame_streams(seed: int, index: int) -> FrameStreams:
    children = np.random.SeedSequence([int(seed), int(index)]).spawn(4)
    return FrameStreams(*(np.random.default_rng(c) for c in children))


def _dropout(items: list, prob: float, rng: np.random.Generator) -> list:
    if prob <= 0 or not items:
        return items
    keep = rng.random(len(items)) >= prob
    return [e for e, k in zip(items, keep) if k]


def radar_frame(
    scenario: Scenario, t: float, streams: FrameStreams, static_density: float = 1.0
) -> tuple[RadarFrame, dict, list[PedestrianTruth]]:
    noise = scenario.noise
    o = scenario.ego_origin
    structures = Structures(scenario.boxes)

    static: list[tuple[Point2, Motion, PointLabel]] = [
        (_jitter(p, o, noise, streams.static), Motion.STATIC, label)
        for p, label in static_returns(scenario, static_density)
    ]
    static = _dropout(static, noise.dropout_prob, streams.static)

    dynamic: list[tuple[Point2, Motion, PointLabel]] = []
    peds = []
    for traj in scenario.pedestrians:
        pos = traj.position(t)
        if pos is None:
            continue
        los = not segment_blocked(o, pos, structures)
        peds.append(PedestrianTruth(traj.ped_id, pos, camera_visibility(scenario, pos), los))
        if los:
            label = PointLabel(PointKind.TARGET, traj.ped_id, "direct")
            for _ in range(scenario.returns_per_path):
                dynamic.append((_jitter(pos, o, noise, streams.dynamic), Motion.DYNAMIC, label))
        for image, _, vname, k in specular_paths(scenario, pos):
            label = PointLabel(PointKind.TARGET, traj.ped_id, "reflected", vname, k)
            for _ in range(scenario.returns_per_path):
                dynamic.append((_jitter(image, o, noise, streams.dynamic), Motion.DYNAMIC, label))
    dynamic = _dropout(dynamic, noise.dropout_prob, streams.dynamic)

    clutter: list[tuple[Point2, Motion, PointLabel]] = []
    x0, y0, x1, y1 = scenario.clutter_region
    rng = streams.clutter
    for rate, motion, kind in (
        (noise.static_clutter_rate, Motion.STATIC, PointKind.STATIC_CLUTTER),
        (noise.dynamic_clutter_rate, Motion.DYNAMIC, PointKind.DYNAMIC_CLUTTER),
    ):
        n = int(rng.poisson(rate)) if rate > 0 else 0
        for _ in range(n):
            clutter.append((Point2(rng.uniform(x0, x1), rng.uniform(y0, y1)), motion, PointLabel(kind)))
    clutter = _dropout(clutter, noise.dropout_prob, rng)

    emitted = static + dynamic + clutter
    points = tuple(RadarPoint(p, m, i) for i, (p, m, _) in enumerate(emitted))
    labels = {i: lab for i, (_, _, lab) in enumerate(emitted)}
    return RadarFrame(t, points), labels, peds


# -- camera ------------------------------------------------------------------


class _RayGrid:
    """Per-pixel ego-frame ray directions, scaled so the ray parameter equals optical depth."""

    def __init__(self, rig: CameraRig):
        k = rig.intrinsics
        vv, uu = np.mgrid[0 : k.height, 0 : k.width]
        d_cam = np.stack([(uu - k.cx) / k.fx, (vv - k.cy) / k.fy, np.ones_like(uu, dtype=float)], -1)
        self.dirs = d_cam.reshape(-1, 3) @ rig.extrinsics.rotation
        self.origin = rig.position
        self.shape = (k.height, k.width)
        self._box_hits: dict[tuple, np.ndarray] = {}

    def box_hits(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Cached `_ray_box` for this grid; parked vehicles repeat every frame."""
        key = (lo.tobytes(), hi.tobytes())
        t = self._box_hits.get(key)
        if t is None:
            if len(self._box_hits) > 64:
                self._box_hits.clear()
            t = self._box_hits[key] = _ray_box(self.origin, self.dirs, lo, hi)
            t.setflags(write=False)
        return t


_RAY_CACHE: dict[tuple, _RayGrid] = {}


def _rays(rig: CameraRig) -> _RayGrid:
    ext = rig.extrinsics
    key = (rig.intrinsics, ext.rotation.tobytes(), ext.translation.tobytes())
    grid = _RAY_CACHE.get(key)
    if grid is None:
        if len(_RAY_CACHE) > 32:
            _RAY_CACHE.clear()
        grid = _RAY_CACHE[key] = _RayGrid(rig)
    return grid


def _ray_box(o: np.ndarray, d: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Entry parameter of each ray into an axis-aligned 3D box (inf if missed)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (lo - o) * inv
        t2 = (hi - o) * inv
    tmin = np.where(np.isnan(t1), -np.inf, np.minimum(t1, t2))
    tmax = np.where(np.isnan(t1), np.inf, np.maximum(t1, t2))
    # axes with zero direction: inside the slab means unconstrained, outside means miss
    zero = d == 0
    inside = (o >= lo) & (o <= hi)
    tmin = np.where(zero, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(zero, np.where(inside, np.inf, -np.inf), tmax)
    near = tmin.max(axis=1)
    far = tmax.min(axis=1)
    hit = (near <= far) & (near > 0)
    return np.where(hit, near, np.inf)


def _ray_cylinder(o: np.ndarray, d: np.ndarray, center: Point2, radius: float, height: float) -> np.ndarray:
    px, py = o[0] - center.x, o[1] - center.y
    a = d[:, 0] ** 2 + d[:, 1] ** 2
    b = 2 * (px * d[:, 0] + py * d[:, 1])
    c = px * px + py * py - radius * radius
    disc = b * b - 4 * a * c
    with np.errstate(invalid="ignore", divide="ignore"):
        t = (-b - np.sqrt(disc)) / (2 * a)
    z = o[2] + t * d[:, 2]
    ok = (disc >= 0) & (a > 0) & (t > 0) & (z >= 0) & (z <= height)
    return np.where(ok, t, np.inf)


def render_camera(
    scenario: Scenario, peds: Sequence[Point2], rng: np.random.Generator
) -> tuple[DepthGrid, SegMask]:
    rays = _rays(scenario.camera)
    o, d = rays.origin, rays.dirs
    noise = scenario.noise
    best = np.full(len(d), np.inf)
    owner = np.full(len(d), -1)
    for i, v in enumerate(scenario.vehicles):
        lo = np.array([v.box.x_min, v.box.y_min, 0.0])
        hi = np.array([v.box.x_max, v.box.y_max, scenario.vehicle_height])
        t = rays.box_hits(lo, hi)
        if noise.depth_sigma_rel > 0:
            t = t * (1.0 + rng.normal(0.0, noise.depth_sigma_rel))
        closer = t < best
        best[closer], owner[closer] = t[closer], i
    for p in peds:
        t = _ray_cylinder(o, d, p, scenario.ped_radius, scenario.ped_height)
        closer = t < best
        best[closer], owner[closer] = t[closer], -2
    if noise.depth_pixel_sigma_rel > 0:
        best = best * (1.0 + rng.normal(0.0, noise.depth_pixel_sigma_rel, size=best.shape))
    depth = np.where(np.isfinite(best) & (best > 0), best, 0.0)
    mask = (owner >= 0).astype(np.uint8)
    h, w = rays.shape
    return DepthGrid(w, h, depth.reshape(h, w)), SegMask(w, h, mask.reshape(h, w))


# -- frames ------------------------------------------------------------------


def generate_frame(scenario: Scenario, t: float, index: int = 0, static_density: float = 1.0) -> SimFrame:
    """Frame `index` at time t; its noise depends only on (scenario.seed, index)."""
    if not (0 <= t <= scenario.duration + 1e-9):
        raise ValueError(f"t={t} outside [0, {scenario.duration}]")
    streams = frame_streams(scenario.seed, index)
    radar, labels, peds = radar_frame(scenario, t, streams, static_density)
    depth, mask = render_camera(scenario, [p.position for p in peds], streams.camera)
    truth = TruthSnapshot(t, tuple(peds), scenario.vehicles, labels)
    return SimFrame(index, radar, depth, mask, truth)


def generate_sequence(scenario: Scenario, static_density: float = 1.0) -> list[SimFrame]:
    return [
        generate_frame(scenario, t, k, static_density)
        for k, t in enumerate(scenario.frame_times())
    ]


# -- built-in scenes -------------------------------------------------------------

CAMERA_POSITION = (-1.8, -0.8, 1.2)
CAMERA_INTRINSICS = CameraIntrinsics.from_fov(320, 160, 120.0)
VB_NEAR_X = 4.1
VB_NEAR_Y = 4.0
VA_NEAR_Y = 3.5


def default_camera() -> CameraRig:
    return CameraRig(CAMERA_INTRINSICS, RigidTransform.forward_camera(CAMERA_POSITION, 0.0))


def parked_pair(gap_width: float = 1.2, width: float = 1.8, length: float = 4.5) -> tuple[Vehicle, Vehicle]:
    """VA (front) and VB (rear) parked on the left with a gap between them."""
    vb = AlignedBox(Point2(VB_NEAR_X + width / 2, VB_NEAR_Y + length / 2), width, length)
    xa = VB_NEAR_X + width + gap_width
    va = AlignedBox(Point2(xa + width / 2, VA_NEAR_Y + length / 2), width, length)
    return Vehicle("VA", va), Vehicle("VB", vb)


def gap_center_x(vehicles: Sequence[Vehicle]) -> float:
    va = next(v.box for v in vehicles if v.name == "VA")
    vb = next(v.box for v in vehicles if v.name == "VB")
    return (vb.x_max + va.x_min) / 2


def _darting(ped_id: str, x: float, y_start: float, speed: float, start: float, y_end: float = 1.5) -> Trajectory:
    return Trajectory(ped_id, (Point2(x, y_start), Point2(x, y_end)), speed, start)


def builtin_scenario(
    name: str,
    gap_width: float = 1.2,
    noise: NoiseSpec = NOMINAL_NOISE,
    seed: int = 0,
    **overrides,
) -> Scenario:
    """SA: one pedestrian darts out through the VA-VB gap. SB: two in sequence.
    SC: one darts out while another walks towards the ego car in plain view."""
    vehicles = parked_pair(gap_width)
    x = gap_center_x(vehicles)
    if name == "SA":
        peds = (_darting("ped1", x, 7.5, 1.2, 0.0),)
        duration = 5.0
    elif name == "SB":
        peds = (_darting("ped1", x, 7.5, 1.6, 0.0), _darting("ped2", x, 8.0, 1.2, 1.2))
        duration = 6.5
    elif name == "SC":
        peds = (
            Trajectory("ped1", (Point2(14.0, 2.0), Point2(3.0, 2.0)), 1.2, 0.0),
            _darting("ped2", x, 7.5, 1.2, 0.0),
        )
        duration = 5.0
    else:
        raise KeyError(f"unknown built-in scenario {name!r}; choose SA, SB or SC")
    sc = Scenario(
        name=name,
        ego_origin=Point2(0.0, 0.0),
        vehicles=vehicles,
        pedestrians=peds,
        camera=default_camera(),
        frame_rate=10.0,
        duration=duration,
        noise=noise,
        seed=seed,
    )
    return replace(sc, **overrides) if overrides else sc


def builtin_scenarios(**kwargs) -> dict[str, Scenario]:
    return {n: builtin_scenario(n, **kwargs) for n in ("SA", "SB", "SC")}
