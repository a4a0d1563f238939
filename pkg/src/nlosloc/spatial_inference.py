"""Parked-vehicle footprint inference from depth clusters refined by static radar returns."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .camera_geometry import vehicle_depth_cloud
from .clustering import dbscan
from .config import PipelineConfig
from .core import (
    AlignedBox,
    CameraIntrinsics,
    DepthGrid,
    Point2,
    RigidTransform,
    SegMask,
    as_xy,
)

log = logging.getLogger(__name__)

HORIZONTAL_LIMIT_DEG = 45.0
VERTICAL_SPREAD = 1e-6


class InsufficientPoints(ValueError):
    pass


class Orientation(enum.Enum):
    HAS_HORIZONTAL = "has_horizontal"
    VERTICAL_ONLY = "vertical_only"


@dataclass(frozen=True)
class FittedSurface:
    start: Point2
    end: Point2
    theta_deg: float  # angle of the fitted line to the x axis, in (-90, 90]
    n_points: int

    @property
    def horizontal(self) -> bool:
        return abs(self.theta_deg) < HORIZONTAL_LIMIT_DEG


@dataclass(frozen=True)
class SurfaceEstimate:
    segments: tuple[FittedSurface, ...]
    orientation: Orientation


def fit_surface(pts: np.ndarray) -> FittedSurface:
    """Least-squares y-on-x line, or x = const when the x spread vanishes."""
    x, y = pts[:, 0], pts[:, 1]
    if x.max() - x.min() <= VERTICAL_SPREAD:
        xc = float(x.mean())
        return FittedSurface(Point2(xc, y.min()), Point2(xc, y.max()), 90.0, len(pts))
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    icpt = float(ym - slope * xm)
    x0, x1 = float(x.min()), float(x.max())
    return FittedSurface(
        Point2(x0, slope * x0 + icpt),
        Point2(x1, slope * x1 + icpt),
        math.degrees(math.atan(slope)),
        len(pts),
    )


def classify_surfaces(cluster) -> SurfaceEstimate:
    """Split a vehicle cluster at its median y and fit a line to each half."""
    pts = as_xy(cluster)
    if len(pts) < 4:
        raise InsufficientPoints(f"need at least 4 points to classify surfaces, got {len(pts)}")
    med = np.median(pts[:, 1])
    groups = [pts[pts[:, 1] <= med], pts[pts[:, 1] > med]]
    segments = tuple(fit_surface(g) for g in groups if len(g) >= 2)
    orientation = (
        Orientation.HAS_HORIZONTAL
        if any(s.horizontal for s in segments)
        else Orientation.VERTICAL_ONLY
    )
    return SurfaceEstimate(segments, orientation)


class Extents(NamedTuple):
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @classmethod
    def of(cls, pts) -> "Extents":
        p = as_xy(pts)
        lo, hi = p.min(axis=0), p.max(axis=0)
        return cls(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def rough_center(extents: Extents, orientation: Orientation, width: float, length: float) -> Point2:
    """Place a standard-size footprint behind the visible face(s).

    With a near-horizontal face the box grows from the cluster's minimum
    corner; with only a side face it hangs from the maximum y instead.
    """
    x = extents.x_min + width / 2
    if orientation is Orientation.HAS_HORIZONTAL:
        return Point2(x, extents.y_min + length / 2)
    return Point2(x, extents.y_max - length / 2)


# -- radar refinement -------------------------------------------------------


def boundary_distance(points: np.ndarray, centers: np.ndarray, width: float, length: float) -> np.ndarray:
    """Distance from each point to the outline of each candidate box, shape (K, N)."""
    d = points[None, :, :] - centers[:, None, :]
    ox = np.abs(d[..., 0]) - width / 2
    oy = np.abs(d[..., 1]) - length / 2
    outside = np.hypot(np.maximum(ox, 0.0), np.maximum(oy, 0.0))
    inside = np.minimum(np.maximum(ox, oy), 0.0)
    return np.abs(outside + inside)


def near_points(rough: AlignedBox, static_points) -> np.ndarray:
    pts = as_xy(static_points)
    sel = (np.abs(pts[:, 0] - rough.center.x) <= rough.width) & (
        np.abs(pts[:, 1] - rough.center.y) <= rough.length
    )
    return pts[sel]


SCORE_SLACK = 1e-9


def grid_offsets(delta: float, step: float) -> np.ndarray:
    """Integer grid indices (i, j) covering [-delta, delta]^2 in `step` increments."""
    n = int(math.floor(delta / step + 1e-9))
    r = np.arange(-n, n + 1)
    ii, jj = np.meshgrid(r, r, indexing="ij")
    return np.column_stack([ii.ravel(), jj.ravel()])


class RefineResult(NamedTuple):
    box: AlignedBox
    score: int
    shift: tuple[float, float]
    n_near: int
    low_confidence: bool


def score_candidates(near: np.ndarray, centers: np.ndarray, width: float, length: float, tau: float) -> np.ndarray:
    if not len(near):
        return np.zeros(len(centers), dtype=np.int64)
    d = boundary_distance(near, centers, width, length)
    return np.count_nonzero(d <= tau + SCORE_SLACK, axis=1)


def refine_box(
    rough: AlignedBox, static_points, tau: float, delta: float, step: float
) -> RefineResult:
    """Translate the rough box over a +-delta grid to hug the most static radar points.

    Only points inside the (x +- W, y +- L) window of the rough box vote. Ties
    go to the smallest displacement, then the smaller x shift, then the
    smaller y shift.
    """
    if not (tau > 0 and delta > 0 and step > 0) or step > delta:
        raise ValueError("need tau, delta, step > 0 and step <= delta")
    near = near_points(rough, static_points)
    if not len(near):
        return RefineResult(rough, 0, (0.0, 0.0), 0, True)
    idx = grid_offsets(delta, step)
    centers = np.array(rough.center) + idx * step
    scores = score_candidates(near, centers, rough.width, rough.length, tau)
    best = np.flatnonzero(scores == scores.max())
    keys = sorted((int(i * i + j * j), int(i), int(j), int(k)) for k, (i, j) in zip(best, idx[best]))
    _, i, j, k = keys[0]
    dx, dy = i * step, j * step
    box = AlignedBox(Point2(*centers[k]), rough.width, rough.length)
    return RefineResult(box, int(scores[k]), (dx, dy), len(near), False)


# -- temporal smoothing ------------------------------------------------------


@dataclass(frozen=True)
class VehicleTrack:
    track_id: int
    history: tuple[AlignedBox, ...]
    box: AlignedBox
    seen: bool = True


@dataclass(frozen=True)
class SpatialState:
    """Smoothed reflector map; `boxes` lists the vehicles present in the latest update."""

    tracks: tuple[VehicleTrack, ...] = ()
    fixed: bool = False
    gap_frame: bool = False
    next_id: int = 0
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def boxes(self) -> list[AlignedBox]:
        return [t.box for t in self.tracks if t.seen]


def _smoothed(history: Sequence[AlignedBox], width: float, length: float) -> AlignedBox:
    centers = np.array([b.center for b in history])
    return AlignedBox(Point2(*centers.mean(axis=0)), width, length)


def smooth_and_fix(
    state: SpatialState,
    new_boxes: Sequence[AlignedBox],
    pedestrian_detected: bool,
    cfg: PipelineConfig = PipelineConfig(),
) -> SpatialState:
    """Fold this frame's refined boxes into the per-vehicle moving average.

    Each track keeps its last `smoothing_window` boxes; its smoothed box is
    the mean centre with the configured footprint. Once a pedestrian has been
    reported the map freezes for good.
    """
    if state.fixed:
        return state
    tracks = list(state.tracks)
    pairs = sorted(
        (tr.box.center.distance(nb.center), ti, ni)
        for ti, tr in enumerate(tracks)
        for ni, nb in enumerate(new_boxes)
    )
    track_of: dict[int, int] = {}
    used_new: set[int] = set()
    for dist, ti, ni in pairs:
        if dist > cfg.match_gate:
            break
        if ti in track_of or ni in used_new:
            continue
        track_of[ti] = ni
        used_new.add(ni)

    out: list[VehicleTrack] = []
    for ti, tr in enumerate(tracks):
        if ti in track_of:
            hist = (tr.history + (new_boxes[track_of[ti]],))[-cfg.smoothing_window :]
            out.append(
                VehicleTrack(tr.track_id, hist, _smoothed(hist, cfg.vehicle_width, cfg.vehicle_length))
            )
        else:
            if tr.seen:
                log.info("vehicle track %d unmatched this frame; dropped until re-acquired", tr.track_id)
            out.append(replace(tr, seen=False))

    next_id = state.next_id
    for ni, nb in enumerate(new_boxes):
        if ni in used_new:
            continue
        if any(t.box.center.distance(nb.center) <= cfg.match_gate for t in out):
            # a second cluster on an already tracked vehicle
            continue
        out.append(
            VehicleTrack(next_id, (nb,), _smoothed((nb,), cfg.vehicle_width, cfg.vehicle_length))
        )
        next_id += 1
    if pedestrian_detected:
        # The map is frozen from here on, so a vehicle missed in just this
        # frame would never come back; parked cars keep their last box.
        out = [tr if tr.seen else replace(tr, seen=True) for tr in out]
    return SpatialState(tuple(out), bool(pedestrian_detected), False, next_id)


def infer_spatial(
    depth: DepthGrid,
    mask: SegMask,
    intrinsics: CameraIntrinsics,
    extrinsics: RigidTransform,
    static_points,
    state: SpatialState,
    cfg: PipelineConfig = PipelineConfig(),
    pedestrian_detected: bool = False,
) -> SpatialState:
    """One frame of vehicle inference: depth cloud -> clusters -> rough boxes -> radar fit -> smoothing."""
    if state.fixed:
        return state
    cloud = vehicle_depth_cloud(depth, mask, intrinsics, extrinsics, cfg.height_band)
    clusters = dbscan(cloud, cfg.vehicle_eps, cfg.vehicle_min_pts).clusters if len(cloud) else []
    static = as_xy(static_points)

    refined: list[AlignedBox] = []
    diag = {"rough": [], "refined": [], "low_confidence": [], "orientation": []}
    for members in sorted(clusters, key=len, reverse=True):
        pts = cloud[members]
        if len(pts) < 4:
            continue
        surf = classify_surfaces(pts)
        center = rough_center(Extents.of(pts), surf.orientation, cfg.vehicle_width, cfg.vehicle_length)
        rough = AlignedBox(center, cfg.vehicle_width, cfg.vehicle_length)
        res = refine_box(rough, static, cfg.refine_tau, cfg.refine_delta, cfg.refine_step)
        refined.append(res.box)
        diag["rough"].append(rough)
        diag["refined"].append(res.box)
        diag["low_confidence"].append(res.low_confidence)
        diag["orientation"].append(surf.orientation.value)

    if not refined:
        log.info("no vehicle clusters this frame; carrying the previous map forward")
        return replace(state, fixed=bool(pedestrian_detected), gap_frame=True, diagnostics=diag)
    new = smooth_and_fix(state, refined, pedestrian_detected, cfg)
    return replace(new, diagnostics=diag)
