from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from oracles import mirror_complex, uncorrected_mirror_x
from nlosloc.core import AlignedBox, LineSeg, Point2
from nlosloc.reflection import (
    Structures,
    first_hit,
    mirror_point,
    mirror_slope_intercept,
    segment_blocked,
    unfold,
)
from nlosloc.simulator import ZERO_NOISE, builtin_scenario, specular_paths

coord = st.floats(-20, 20, allow_nan=False)


def test_point_on_line_is_fixed():
    seg = LineSeg(Point2(0, 1), Point2(2, 3))
    assert mirror_point((1, 2), seg).distance((1, 2)) <= 1e-12


def test_mirror_examples():
    assert mirror_point((1, 2), LineSeg(Point2(0, 0), Point2(1, 0))) == Point2(1, -2)
    assert mirror_point((2, 0), LineSeg(Point2(0, 0), Point2(1, 1))).distance((0, 2)) <= 1e-12
    assert mirror_point((1, 5), LineSeg(Point2(3, 0), Point2(3, 1))) == Point2(5, 5)
    assert mirror_slope_intercept((1, 2), 0.0, 0.0) == Point2(1, -2)
    assert mirror_slope_intercept((2, 0), 1.0, 0.0).distance((0, 2)) <= 1e-12


def test_uncorrected_form_loses_x_on_flat_lines():
    for x in (-3.0, 0.5, 7.0):
        assert uncorrected_mirror_x((x, 1.0), 0.0, 2.0) == 0.0
        assert mirror_slope_intercept((x, 1.0), 0.0, 2.0).x == x


@given(coord, coord, coord, coord, coord, coord)
def test_matches_complex_oracle(px, py, ax, ay, bx, by):
    assume(math.hypot(bx - ax, by - ay) > 0.1)
    got = mirror_point((px, py), LineSeg(Point2(ax, ay), Point2(bx, by)))
    assert got.distance(mirror_complex((px, py), (ax, ay), (bx, by))) <= 1e-9


@given(coord, coord, st.floats(-10, 10), st.floats(-10, 10))
def test_slope_intercept_equals_vector_form(px, py, alpha, beta):
    seg = LineSeg(Point2(0.0, beta), Point2(1.0, alpha + beta))
    assert mirror_slope_intercept((px, py), alpha, beta).distance(mirror_point((px, py), seg)) <= 1e-9


@given(coord, coord, coord, coord, coord, coord)
def test_involution(px, py, ax, ay, bx, by):
    assume(math.hypot(bx - ax, by - ay) > 0.1)
    seg = LineSeg(Point2(ax, ay), Point2(bx, by))
    assert mirror_point(mirror_point((px, py), seg), seg).distance((px, py)) <= 1e-9


def test_first_hit_miss():
    assert first_hit((0, 0), (4, 0), [AlignedBox(Point2(3, 5), 2, 2)]) is None
    assert first_hit((0, 0), (4, 0), []) is None


def test_first_hit_on_near_edge():
    hit = first_hit((0, 0), (4, 0), [AlignedBox(Point2(3, 0), 2, 2)])
    assert hit.point == Point2(2, 0)
    assert hit.edge.a.x == hit.edge.b.x == 2.0
    assert hit.edge_index == 3 and hit.t == 0.5


def test_first_hit_takes_nearer_box():
    far = AlignedBox(Point2(8, 0), 2, 2)
    near = AlignedBox(Point2(4, 0), 2, 2)
    hit = first_hit((0, 0), (10, 0), [far, near])
    assert hit.box_index == 1 and hit.point == Point2(3, 0)


def test_corner_tie_is_deterministic():
    box = AlignedBox(Point2(2, 2), 2, 2)  # corner at (1, 1)
    hits = {first_hit((0, 0), (1.5, 1.5), [box]) for _ in range(5)}
    assert len(hits) == 1
    hit = hits.pop()
    assert hit.point.distance((1, 1)) <= 1e-12
    assert hit.edge_index == 0  # bottom edge wins the tie over the left edge


def test_segment_blocked():
    box = [AlignedBox(Point2(3, 0), 2, 2)]
    assert segment_blocked((0, 0), (5, 0), box)
    assert not segment_blocked((0, 0), (2, 0), box)  # ends on the surface
    assert not segment_blocked((0, 3), (5, 3), box)


def test_unobstructed_point_passes_through():
    tr = unfold((5, -3), (0, 0), [AlignedBox(Point2(3, 5), 2, 2)])
    assert tr.corrected == Point2(5, -3) and not tr.reflected and not tr.truncated


def test_single_reflection_unfolds_to_truth():
    sc = builtin_scenario("SA", noise=ZERO_NOISE)
    ped = Point2(6.5, 4.5)  # in the gap mouth, hidden from the radar by VB
    assert segment_blocked(sc.ego_origin, ped, sc.boxes)
    paths = specular_paths(sc, ped)
    assert paths
    for image, bounce, _, _ in paths:
        tr = unfold(image, sc.ego_origin, sc.boxes)
        assert len(tr.bounces) == 1
        assert tr.corrected.distance(ped) <= 1e-9
        assert tr.bounces[0].point.distance(bounce) <= 1e-9
        # the apparent range is the folded path length
        folded = sc.ego_origin.distance(bounce) + bounce.distance(ped)
        assert abs(sc.ego_origin.distance(image) - folded) <= 1e-9


def test_bounce_limit_truncates():
    walls = [AlignedBox(Point2(0, 2), 100, 1), AlignedBox(Point2(0, -2), 100, 1)]
    # a steep ray bouncing between two parallel walls
    tr = unfold((3, 30), (0, 0), walls, max_bounces=3)
    assert tr.truncated and len(tr.bounces) == 3
    assert not unfold((3, 30), (0, 0), walls, max_bounces=50).truncated
    with pytest.raises(ValueError):
        unfold((1, 1), (0, 0), walls, max_bounces=0)


def test_structures_reusable():
    boxes = [AlignedBox(Point2(3, 0), 2, 2)]
    s = Structures(boxes)
    assert len(s) == 1
    assert first_hit((0, 0), (4, 0), s) == first_hit((0, 0), (4, 0), boxes)


def test_hit_at_origin_is_ignored():
    box = [AlignedBox(Point2(3, 0), 2, 2)]
    # leaving a surface after a bounce must not re-hit the same edge
    assert first_hit((2, 0), (1, 0), box) is None


@given(st.floats(-np.pi, np.pi), st.floats(0.5, 6))
def test_unfold_deterministic(angle, r):
    boxes = [AlignedBox(Point2(3, 1), 1.8, 4.5), AlignedBox(Point2(6, -2), 1.8, 4.5)]
    p = (r * math.cos(angle), r * math.sin(angle))
    assert unfold(p, (0, 0), boxes) == unfold(p, (0, 0), boxes)
