"""Pedestrian position estimates from unfolded dynamic radar returns."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .clustering import centroid, dbscan
from .config import PipelineConfig
from .core import AlignedBox, Point2, as_xy
from .reflection import ReflectionTrace, Structures, unfold
from .spatial_inference import SpatialState


@dataclass(frozen=True)
class TargetEstimate:
    position: Point2
    support: int
    direct_count: int
    reflected_count: int
    cluster_id: int


@dataclass(frozen=True)
class Localization:
    estimates: tuple[TargetEstimate, ...]
    traces: tuple[ReflectionTrace, ...]
    rejected_near_structure: int = 0
    rejected_direct_only: int = 0
    truncated: int = 0


def localize_detailed(
    dynamic_points,
    boxes: Sequence[AlignedBox] | SpatialState,
    origin,
    cfg: PipelineConfig = PipelineConfig(),
) -> Localization:
    if isinstance(boxes, SpatialState):
        boxes = boxes.boxes
    pts = as_xy(dynamic_points)
    structures = Structures(boxes)
    traces = tuple(unfold(p, origin, structures, cfg.max_bounces, cfg.hit_epsilon) for p in pts)
    kept = [tr for tr in traces if not tr.truncated]
    n_trunc = len(traces) - len(kept)
    if not kept:
        return Localization((), traces, truncated=n_trunc)

    corrected = np.array([tr.corrected for tr in kept])
    result = dbscan(corrected, cfg.target_eps, cfg.target_min_pts)
    estimates = []
    near_structure = direct_only = 0
    for cid, members in enumerate(result.clusters):
        c = centroid(corrected[members])
        if any(b.contains(c, cfg.structure_margin) for b in boxes):
            near_structure += 1
            continue
        n_reflected = sum(kept[m].reflected for m in members)
        if n_reflected == 0:
            direct_only += 1
            continue
        estimates.append(TargetEstimate(c, len(members), len(members) - n_reflected, n_reflected, cid))
    estimates.sort(key=lambda e: -e.support)
    return Localization(tuple(estimates), traces, near_structure, direct_only, n_trunc)


def localize(
    dynamic_points, boxes: Sequence[AlignedBox] | SpatialState, origin, cfg: PipelineConfig = PipelineConfig()
) -> list[TargetEstimate]:
    """Unfold, cluster, and keep clusters that are off the vehicles and carry a reflected return."""
    return list(localize_detailed(dynamic_points, boxes, origin, cfg).estimates)


def pedestrian_box(estimate: TargetEstimate | Point2, size: float = 1.7) -> AlignedBox:
    pos = estimate.position if isinstance(estimate, TargetEstimate) else Point2(*estimate)
    return AlignedBox(pos, size, size)
