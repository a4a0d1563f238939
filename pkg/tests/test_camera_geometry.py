from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlosloc.camera_geometry import project, unproject, vehicle_depth_cloud, vehicle_pixels
from nlosloc.core import CameraIntrinsics, ConfigurationError, DepthGrid, RigidTransform, SegMask

K100 = CameraIntrinsics(100, 100, 50, 50, 101, 101)


def depth_with(k: CameraIntrinsics, pixels: dict) -> DepthGrid:
    v = np.zeros((k.height, k.width))
    for (u, row), d in pixels.items():
        v[row, u] = d
    return DepthGrid(k.width, k.height, v)


def test_principal_point_maps_to_optical_axis():
    cloud = unproject(depth_with(K100, {(50, 50): 5.0}), K100)
    assert cloud.points.tolist() == [[0.0, 0.0, 5.0]]


def test_pinhole_arithmetic():
    k = CameraIntrinsics(100, 100, 50, 50, 200, 100)
    cloud = unproject(depth_with(k, {(150, 50): 2.0}), k)
    assert cloud.points.tolist() == [[2.0, 0.0, 2.0]]
    assert cloud.pixels.tolist() == [[150, 50]]


def test_invalid_depth_is_skipped():
    cloud = unproject(depth_with(K100, {(10, 10): 0.0, (20, 20): -1.0, (30, 30): 1.0}), K100)
    assert cloud.pixels.tolist() == [[30, 30]]
    only = unproject(depth_with(K100, {(10, 10): 0.0}), K100, np.array([[10, 10]]))
    assert len(only) == 0


def test_pixel_subset_outside_image():
    with pytest.raises(ConfigurationError):
        unproject(depth_with(K100, {}), K100, np.array([[101, 0]]))


def test_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        unproject(DepthGrid(2, 2, np.ones(4)), K100)


def test_vehicle_pixels_cases():
    assert len(vehicle_pixels(SegMask.empty(3, 3))) == 0
    assert len(vehicle_pixels(SegMask(2, 2, np.ones(4, dtype=int)))) == 4
    board = (np.indices((4, 4)).sum(axis=0) % 2 == 0).astype(int)
    px = vehicle_pixels(SegMask(4, 4, board))
    want = sorted((u, v) for v in range(4) for u in range(4) if (u + v) % 2 == 0)
    assert sorted(map(tuple, px.tolist())) == want
    assert len(px) == 8


def test_vehicle_cloud_empty_mask():
    k = K100
    out = vehicle_depth_cloud(depth_with(k, {(50, 50): 3.0}), SegMask.empty(k.width, k.height), k, RigidTransform())
    assert out.shape == (0, 2)


def test_vehicle_cloud_single_pixel():
    k = K100
    depth = depth_with(k, {(50, 50): 3.0})
    mask = SegMask(k.width, k.height, (depth.values > 0).astype(int))
    # identity extrinsics: the optical axis is ego z, so the ground projection is the origin
    assert vehicle_depth_cloud(depth, mask, k, RigidTransform(), None).tolist() == [[0.0, 0.0]]
    # a forward camera at ground level puts the point 3 m ahead
    fwd = RigidTransform.forward_camera((0.0, 0.0, 0.0))
    assert np.allclose(vehicle_depth_cloud(depth, mask, k, fwd, None), [[3.0, 0.0]])


def test_full_mask_equals_unrestricted_unprojection():
    rng = np.random.default_rng(0)
    k = CameraIntrinsics(40, 40, 15.5, 9.5, 32, 20)
    vals = rng.uniform(1, 10, (20, 32)) * (rng.random((20, 32)) > 0.2)
    depth = DepthGrid(32, 20, vals)
    tf = RigidTransform.forward_camera((-1.0, 0.5, 1.2), 0.3)
    got = vehicle_depth_cloud(depth, SegMask(32, 20, np.ones(640, dtype=int)), k, tf, None)
    want = tf.apply_inverse(unproject(depth, k).points)[:, :2]
    assert np.array_equal(np.sort(got, axis=0), np.sort(want, axis=0))


def test_height_band_filters():
    k = CameraIntrinsics(40, 40, 15.5, 9.5, 32, 20)
    depth = DepthGrid(32, 20, np.full(640, 4.0))
    full = SegMask(32, 20, np.ones(640, dtype=int))
    tf = RigidTransform.forward_camera((0.0, 0.0, 1.0))
    everything = vehicle_depth_cloud(depth, full, k, tf, None)
    banded = vehicle_depth_cloud(depth, full, k, tf, (0.9, 1.1))
    assert 0 < len(banded) < len(everything)
    with pytest.raises(ConfigurationError):
        vehicle_depth_cloud(depth, SegMask.empty(3, 3), k, tf)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_project_unproject_round_trip(seed):
    rng = np.random.default_rng(seed)
    k = CameraIntrinsics(*rng.uniform(20, 200, 2), 15.0, 10.0, 30, 20)
    depth = DepthGrid(30, 20, rng.uniform(-1, 30, 600))
    cloud = unproject(depth, k)
    uvd = project(cloud.points, k)
    want = np.column_stack([cloud.pixels, depth.values[cloud.pixels[:, 1], cloud.pixels[:, 0]]])
    assert np.allclose(uvd, want, atol=1e-6, rtol=0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(-4, 4))
def test_depth_scaling_is_exact(seed, exponent):
    rng = np.random.default_rng(seed)
    k = CameraIntrinsics(50, 50, 7.0, 5.0, 16, 12)
    depth = DepthGrid(16, 12, rng.uniform(0.5, 20, 192))
    s = 2.0**exponent  # power-of-two scale keeps every product exact
    a = unproject(depth, k).points
    b = unproject(DepthGrid(16, 12, depth.values * s), k).points
    assert np.array_equal(b, a * s)
    t = rng.uniform(0.1, 10)
    c = unproject(DepthGrid(16, 12, depth.values * t), k).points
    assert np.allclose(c, a * t, rtol=1e-12, atol=0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cloud_no_larger_than_mask(seed):
    rng = np.random.default_rng(seed)
    k = CameraIntrinsics(50, 50, 7.0, 5.0, 16, 12)
    depth = DepthGrid(16, 12, rng.uniform(-2, 10, 192))
    mask = SegMask(16, 12, (rng.random(192) > 0.5).astype(int))
    cloud = vehicle_depth_cloud(depth, mask, k, RigidTransform.forward_camera((0, 0, 1)))
    assert len(cloud) <= int(mask.values.sum())
