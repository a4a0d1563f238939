"""Specular reflection off vehicle edges and unfolding of multipath returns."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .core import AlignedBox, LineSeg, Point2, box_edges

DEFAULT_MAX_BOUNCES = 3
DEFAULT_HIT_EPSILON = 1e-9


def mirror_point(p, seg: LineSeg) -> Point2:
    """Mirror image of `p` across the infinite line through `seg`."""
    ax, ay = seg.a
    dx, dy = seg.b.x - ax, seg.b.y - ay
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / (dx * dx + dy * dy)
    fx, fy = ax + t * dx, ay + t * dy
    return Point2(2 * fx - p[0], 2 * fy - p[1])


def mirror_slope_intercept(p, alpha: float, beta: float) -> Point2:
    """Mirror across y = alpha*x + beta, written in slope-intercept form.

    x' = (2x + 2*alpha*(y - beta)) / (alpha^2 + 1) - x
    y' = 2*(alpha*(x' + x)/2 + beta) - y
    """
    x, y = p[0], p[1]
    xr = (2 * x + 2 * alpha * (y - beta)) / (alpha * alpha + 1) - x
    yr = 2 * (alpha * (xr + x) / 2 + beta) - y
    return Point2(xr, yr)


class Hit(NamedTuple):
    point: Point2
    edge: LineSeg
    box_index: int
    edge_index: int
    t: float


def _edge_table(structures: Sequence[AlignedBox]) -> tuple[np.ndarray, list[LineSeg]]:
    segs = [e for b in structures for e in box_edges(b)]
    if not segs:
        return np.zeros((0, 4)), segs
    return np.array([[s.a.x, s.a.y, s.b.x, s.b.y] for s in segs]), segs


class Structures:
    """Reflector set with its edges precomputed for repeated ray casts."""

    def __init__(self, boxes: Sequence[AlignedBox]):
        self.boxes = tuple(boxes)
        self.table, self.segments = _edge_table(self.boxes)

    def __len__(self) -> int:
        return len(self.boxes)


def _as_structures(structures) -> Structures:
    return structures if isinstance(structures, Structures) else Structures(structures)


def segment_hits(origin, target, structures, hit_epsilon: float = DEFAULT_HIT_EPSILON):
    """All edge crossings of the segment origin->target as (t, flat_edge_index, q) arrays.

    t is the fraction along the segment; crossings within `hit_epsilon`
    metres of the origin and collinear overlaps are ignored.
    """
    st = _as_structures(structures)
    if not len(st.table):
        return np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros((0, 2))
    ox, oy = float(origin[0]), float(origin[1])
    dx, dy = float(target[0]) - ox, float(target[1]) - oy
    ax, ay = st.table[:, 0], st.table[:, 1]
    ex, ey = st.table[:, 2] - ax, st.table[:, 3] - ay
    denom = dx * ey - dy * ex
    wx, wy = ax - ox, ay - oy
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = (wx * ey - wy * ex) / denom
        s = (wx * dy - wy * dx) / denom
        tol = 1e-12
        ok = (np.abs(denom) > 1e-15) & (t >= -tol) & (t <= 1 + tol) & (s >= -tol) & (s <= 1 + tol)
        ok &= t * np.hypot(dx, dy) > hit_epsilon
    idx = np.flatnonzero(ok)
    tt = t[idx]
    q = np.column_stack([ox + tt * dx, oy + tt * dy])
    return tt, idx, q


def first_hit(origin, target, structures, hit_epsilon: float = DEFAULT_HIT_EPSILON) -> Hit | None:
    """Nearest crossing of origin->target with any box edge.

    Simultaneous crossings (a ray through a corner) resolve to the lowest
    box index, then the lowest edge index in `box_edges` order.
    """
    st = _as_structures(structures)
    tt, idx, q = segment_hits(origin, target, st, hit_epsilon)
    if not len(tt):
        return None
    tmin = tt.min()
    tied = np.flatnonzero(tt <= tmin + 1e-12)
    k = tied[np.argmin(idx[tied])]
    flat = int(idx[k])
    return Hit(Point2(*q[k]), st.segments[flat], flat // 4, flat % 4, float(tt[k]))


def segment_blocked(a, b, structures, eps: float = 1e-9) -> bool:
    """True if a->b crosses any edge strictly between its endpoints (eps metres of slack at both ends)."""
    st = _as_structures(structures)
    tt, _, _ = segment_hits(a, b, st, eps)
    if not len(tt):
        return False
    length = float(np.hypot(b[0] - a[0], b[1] - a[1]))
    return bool(np.any(tt * length < length - eps))


@dataclass(frozen=True)
class Bounce:
    point: Point2
    edge: LineSeg
    box_index: int
    edge_index: int


@dataclass(frozen=True)
class ReflectionTrace:
    input: Point2
    corrected: Point2
    bounces: tuple[Bounce, ...] = field(default_factory=tuple)
    truncated: bool = False

    @property
    def reflected(self) -> bool:
        return bool(self.bounces)


def unfold(
    dynamic_point,
    origin,
    structures,
    max_bounces: int = DEFAULT_MAX_BOUNCES,
    hit_epsilon: float = DEFAULT_HIT_EPSILON,
) -> ReflectionTrace:
    """Undo specular bounces along the apparent ray origin->point.

    Each crossing mirrors the remaining path across the struck edge and moves
    the virtual origin to the crossing. A path still crossing an edge after
    `max_bounces` mirrors is marked truncated.
    """
    if max_bounces < 1:
        raise ValueError("max_bounces must be >= 1")
    st = _as_structures(structures)
    start = Point2(*dynamic_point[:2])
    cur_origin = Point2(*origin[:2])
    cur = start
    bounces: list[Bounce] = []
    truncated = False
    while True:
        hit = first_hit(cur_origin, cur, st, hit_epsilon)
        if hit is None:
            break
        if len(bounces) == max_bounces:
            truncated = True
            break
        cur = mirror_point(cur, hit.edge)
        bounces.append(Bounce(hit.point, hit.edge, hit.box_index, hit.edge_index))
        cur_origin = hit.point
    return ReflectionTrace(start, cur, tuple(bounces), truncated)
