"""Depth-map unprojection and vehicle region extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CameraIntrinsics,
    ConfigurationError,
    DepthGrid,
    RigidTransform,
    SegMask,
)

DEFAULT_HEIGHT_BAND = (0.2, 2.2)


@dataclass(frozen=True, eq=False)
class DepthPointCloud:
    """Unprojected pixels: `pixels` is (N, 2) of (u, v), `points` is (N, 3) camera-frame xyz."""

    pixels: np.ndarray
    points: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


def _check_dims(depth: DepthGrid, k: CameraIntrinsics) -> None:
    if (depth.width, depth.height) != (k.width, k.height):
        raise ConfigurationError(
            f"depth is {depth.width}x{depth.height} but intrinsics describe {k.width}x{k.height}"
        )


def unproject(
    depth: DepthGrid, k: CameraIntrinsics, pixels: np.ndarray | None = None
) -> DepthPointCloud:
    """Back-project valid depth pixels through the pinhole model.

    `pixels` optionally restricts the output to an (N, 2) set of (u, v) indices.
    """
    _check_dims(depth, k)
    if pixels is None:
        vv, uu = np.nonzero(depth.values > 0)
    else:
        pix = np.asarray(pixels, dtype=np.int64).reshape(-1, 2)
        uu, vv = pix[:, 0], pix[:, 1]
        if len(pix) and (
            uu.min() < 0 or vv.min() < 0 or uu.max() >= k.width or vv.max() >= k.height
        ):
            raise ConfigurationError("pixel set reaches outside the image")
        keep = depth.values[vv, uu] > 0
        uu, vv = uu[keep], vv[keep]
    d = depth.values[vv, uu]
    pts = np.column_stack([d * (uu - k.cx) / k.fx, d * (vv - k.cy) / k.fy, d])
    return DepthPointCloud(np.column_stack([uu, vv]), pts)


def project(points: np.ndarray, k: CameraIntrinsics) -> np.ndarray:
    """Inverse of `unproject`: camera-frame xyz -> (u, v, depth)."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    z = p[:, 2]
    return np.column_stack([k.fx * p[:, 0] / z + k.cx, k.fy * p[:, 1] / z + k.cy, z])


def vehicle_pixels(mask: SegMask) -> np.ndarray:
    """(u, v) of every pixel flagged as vehicle, in row-major scan order."""
    vv, uu = np.nonzero(mask.values == 1)
    return np.column_stack([uu, vv]).astype(np.int64)


def vehicle_depth_cloud(
    depth: DepthGrid,
    mask: SegMask,
    k: CameraIntrinsics,
    extrinsics: RigidTransform,
    height_band: tuple[float, float] | None = DEFAULT_HEIGHT_BAND,
) -> np.ndarray:
    """Ground-plane (N, 2) projection of the masked depth pixels in the ego frame.

    Points whose ego height falls outside `height_band` are discarded before
    the height coordinate is dropped. Pass None to keep everything.
    """
    if (mask.width, mask.height) != (depth.width, depth.height):
        raise ConfigurationError("mask and depth dimensions differ")
    cloud = unproject(depth, k, vehicle_pixels(mask))
    if not len(cloud):
        return np.zeros((0, 2))
    ego = extrinsics.apply_inverse(cloud.points)
    if height_band is not None:
        lo, hi = height_band
        ego = ego[(ego[:, 2] >= lo) & (ego[:, 2] <= hi)]
    return ego[:, :2].copy()
