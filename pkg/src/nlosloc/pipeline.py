"""Sequential per-frame driver: spatial inference followed by target localisation."""

from __future__ import annotations

from dataclasses import dataclass, field

from .config import PipelineConfig
from .core import CameraIntrinsics, DepthGrid, Point2, RadarFrame, RigidTransform, SegMask
from .localization import TargetEstimate, localize_detailed
from .spatial_inference import SpatialState, infer_spatial


@dataclass(frozen=True)
class FrameResult:
    t: float
    spatial: SpatialState
    estimates: tuple[TargetEstimate, ...]
    diagnostics: dict = field(default_factory=dict)


class Pipeline:
    """Holds the temporal state for one scenario; feed frames in time order."""

    def __init__(
        self,
        intrinsics: CameraIntrinsics,
        extrinsics: RigidTransform,
        origin: Point2,
        cfg: PipelineConfig | None = None,
    ):
        self.intrinsics = intrinsics
        self.extrinsics = extrinsics
        self.origin = Point2(*origin)
        self.cfg = cfg or PipelineConfig()
        self.state = SpatialState()
        self._detected = False
        self._last_t: float | None = None

    def step(self, radar: RadarFrame, depth: DepthGrid, mask: SegMask) -> FrameResult:
        if self._last_t is not None and not radar.timestamp > self._last_t:
            raise ValueError(f"frame at t={radar.timestamp} is not after t={self._last_t}")
        self._last_t = radar.timestamp
        static, dynamic = radar.partition()
        self.state = infer_spatial(
            depth,
            mask,
            self.intrinsics,
            self.extrinsics,
            [p.position for p in static],
            self.state,
            self.cfg,
            pedestrian_detected=self._detected,
        )
        loc = localize_detailed([p.position for p in dynamic], self.state.boxes, self.origin, self.cfg)
        self._detected = self._detected or bool(loc.estimates)
        diag = {
            "n_static": len(static),
            "n_dynamic": len(dynamic),
            "n_reflected": sum(tr.reflected for tr in loc.traces),
            "truncated": loc.truncated,
            "rejected_near_structure": loc.rejected_near_structure,
            "rejected_direct_only": loc.rejected_direct_only,
            "gap_frame": self.state.gap_frame,
            "fixed": self.state.fixed,
        }
        return FrameResult(radar.timestamp, self.state, loc.estimates, diag)
