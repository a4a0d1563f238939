from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlosloc.config import PipelineConfig
from nlosloc.core import AlignedBox, Point2
from nlosloc.localization import localize, localize_detailed, pedestrian_box
from nlosloc.simulator import ZERO_NOISE, builtin_scenario, specular_paths
from nlosloc.spatial_inference import SpatialState, smooth_and_fix

SA = builtin_scenario("SA", noise=ZERO_NOISE)
ORIGIN = SA.ego_origin


def test_no_points():
    assert localize([], SA.boxes, ORIGIN) == []


def test_reflected_and_direct_returns_give_one_estimate():
    ped = Point2(6.2, 3.5)
    images = [image for image, _, _, _ in specular_paths(SA, ped)]
    assert images
    reflected = [images[k % len(images)] for k in range(8)]
    pts = reflected + [ped, ped]
    est = localize(pts, SA.boxes, ORIGIN)
    assert len(est) == 1
    assert est[0].position.distance(ped) <= 0.05
    assert (est[0].reflected_count, est[0].direct_count, est[0].support) == (8, 2, 10)


def test_direct_only_cluster_is_dropped():
    pts = [(2.0 + 0.05 * k, -3.0) for k in range(5)]
    loc = localize_detailed(pts, SA.boxes, ORIGIN)
    assert loc.estimates == () and loc.rejected_direct_only == 1


def test_cluster_on_a_vehicle_is_dropped():
    va = next(v.box for v in SA.vehicles if v.name == "VA")
    # direct returns just in front of VA's near face
    surface = [(va.x_min - 0.1, va.y_min + 0.5 + 0.05 * k) for k in range(4)]
    loc = localize_detailed(surface, SA.boxes, ORIGIN)
    assert loc.estimates == () and loc.rejected_near_structure == 1
    assert len(localize(surface, SA.boxes, ORIGIN, PipelineConfig(structure_margin=0.05))) == 0


def test_accepts_spatial_state():
    state = SpatialState()
    for _ in range(2):
        state = smooth_and_fix(state, SA.boxes, False)
    ped = Point2(6.2, 3.5)
    images = [image for image, _, _, _ in specular_paths(SA, ped)] * 3
    assert localize(images, state, ORIGIN) == localize(images, SA.boxes, ORIGIN)


def test_estimates_sorted_by_support():
    wall = [AlignedBox(Point2(0.0, -10.5), 40.0, 1.0)]  # near face on y = -10
    small = [(2.0 + 0.05 * k, -3.0) for k in range(3)]
    large = [(3.0 + 0.05 * k, -6.0) for k in range(6)]
    apparent = [(x, -20.0 - y) for x, y in small + large]  # images behind the wall face
    est = localize(apparent, wall, ORIGIN)
    assert [e.support for e in est] == [6, 3]
    assert est[0].position.distance((3.125, -6.0)) <= 1e-9


def test_pedestrian_box_examples():
    b = pedestrian_box(Point2(6, 3))
    assert b.corners()[0].distance((5.15, 2.15)) <= 1e-12
    assert b.corners()[2].distance((6.85, 3.85)) <= 1e-12
    b0 = pedestrian_box(Point2(0, 0))
    assert (b0.x_min, b0.x_max, b0.y_min, b0.y_max) == (-0.85, 0.85, -0.85, 0.85)
    assert b0.area == pytest.approx(2.89, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 40))
def test_filters_hold_for_random_returns(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.uniform((0, -4), (14, 12), (n, 2))
    cfg = PipelineConfig()
    loc = localize_detailed(pts, SA.boxes, ORIGIN, cfg)
    for e in loc.estimates:
        assert e.reflected_count >= 1
        assert not any(b.contains(e.position, cfg.structure_margin) for b in SA.boxes)
    again = localize_detailed(pts, SA.boxes, ORIGIN, cfg)
    assert again.estimates == loc.estimates


def test_zero_noise_completeness():
    # every hidden position clear of the structure margin, with a bounce path
    # and enough returns, yields exactly one estimate
    cfg = PipelineConfig()
    checked = 0
    for x in np.arange(6.25, 6.8, 0.05):
        for y in np.arange(4.25, 5.5, 0.25):
            ped = Point2(x, y)
            if any(b.contains(ped, cfg.structure_margin) for b in SA.boxes):
                continue
            images = [image for image, _, _, _ in specular_paths(SA, ped)]
            if not images:
                continue
            pts = images * SA.returns_per_path
            if len(pts) < cfg.target_min_pts:
                continue
            est = localize(pts, SA.boxes, ORIGIN, cfg)
            assert len(est) == 1 and est[0].position.distance(ped) <= 1e-9
            checked += 1
    assert checked > 10
