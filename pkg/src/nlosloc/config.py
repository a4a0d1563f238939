"""Pipeline parameters with their defaults."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .core import ConfigurationError


@dataclass(frozen=True)
class PipelineConfig:
    # vehicle footprint prior
    vehicle_width: float = 1.8
    vehicle_length: float = 4.5
    # depth cloud -> vehicle clusters
    height_band: tuple[float, float] | None = (0.2, 2.2)
    vehicle_eps: float = 0.5
    vehicle_min_pts: int = 8
    # radar refinement grid search
    refine_tau: float = 0.15
    refine_delta: float = 0.5
    refine_step: float = 0.05
    # temporal smoothing
    smoothing_window: int = 5
    match_gate: float = 1.5
    # reflection unfolding
    max_bounces: int = 3
    hit_epsilon: float = 1e-9
    # target clustering and ghost filters
    target_eps: float = 0.6
    target_min_pts: int = 2
    structure_margin: float = 0.3
    ped_box_size: float = 1.7

    def __post_init__(self) -> None:
        positive = (
            "vehicle_width",
            "vehicle_length",
            "vehicle_eps",
            "refine_tau",
            "refine_delta",
            "refine_step",
            "match_gate",
            "target_eps",
            "ped_box_size",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.refine_step > self.refine_delta:
            raise ConfigurationError("refine_step must not exceed refine_delta")
        for name in ("vehicle_min_pts", "target_min_pts", "smoothing_window", "max_bounces"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.structure_margin < 0 or self.hit_epsilon < 0:
            raise ConfigurationError("structure_margin and hit_epsilon must be non-negative")
        if self.height_band is not None:
            lo, hi = self.height_band
            if not lo < hi:
                raise ConfigurationError("height_band must be (low, high) with low < high")
            object.__setattr__(self, "height_band", (float(lo), float(hi)))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["height_band"] is not None:
            d["height_band"] = list(d["height_band"])
        return d

    @classmethod
    def from_dict(cls, data: dict, strict: bool = True) -> "PipelineConfig":
        known = set(field_names())
        unknown = sorted(set(data) - known)
        if unknown and strict:
            raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {k: v for k, v in data.items() if k in known}
        if kwargs.get("height_band") is not None:
            kwargs["height_band"] = tuple(kwargs["height_band"])
        return cls(**kwargs)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def field_names() -> list[str]:
    return [f.name for f in dataclasses.fields(PipelineConfig)]
