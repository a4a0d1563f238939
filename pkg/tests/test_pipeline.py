from __future__ import annotations

import pytest

from nlosloc.config import PipelineConfig, field_names
from nlosloc.core import ConfigurationError
from nlosloc.experiment import evaluate, run_pipeline, run_scenario
from nlosloc.pipeline import Pipeline
from nlosloc.simulator import NOMINAL_NOISE, ZERO_NOISE, builtin_scenario, generate_sequence


@pytest.mark.parametrize(
    "changes",
    [
        {"refine_tau": 0.0},
        {"vehicle_eps": -1.0},
        {"refine_step": 0.6},
        {"target_min_pts": 0},
        {"smoothing_window": 0},
        {"structure_margin": -0.1},
        {"height_band": (2.0, 1.0)},
    ],
)
def test_config_validation(changes):
    with pytest.raises(ConfigurationError):
        PipelineConfig(**changes)


def test_config_dict_round_trip():
    cfg = PipelineConfig(height_band=(0.1, 1.9), max_bounces=2)
    assert PipelineConfig.from_dict(cfg.to_dict()) == cfg
    assert set(cfg.to_dict()) == set(field_names())
    with pytest.raises(ConfigurationError, match="bogus"):
        PipelineConfig.from_dict({"bogus": 1})
    assert PipelineConfig.from_dict({"bogus": 1}, strict=False) == PipelineConfig()


def test_timestamps_must_increase():
    sc = builtin_scenario("SA", noise=ZERO_NOISE)
    frames = generate_sequence(sc)[:2]
    pl = Pipeline(sc.camera.intrinsics, sc.camera.extrinsics, sc.ego_origin)
    pl.step(frames[1].radar, frames[1].depth, frames[1].mask)
    with pytest.raises(ValueError, match="not after"):
        pl.step(frames[0].radar, frames[0].depth, frames[0].mask)
    with pytest.raises(ValueError, match="not after"):
        pl.step(frames[1].radar, frames[1].depth, frames[1].mask)


def test_map_fixes_after_first_detection():
    out = run_scenario(builtin_scenario("SA", noise=ZERO_NOISE))
    first = next(k for k, r in enumerate(out.results) if r.estimates)
    assert not any(r.diagnostics["fixed"] for r in out.results[: first + 1])
    assert all(r.diagnostics["fixed"] for r in out.results[first + 1 :])
    assert all(r.spatial.boxes == out.results[first + 1].spatial.boxes for r in out.results[first + 1 :])


def test_evaluate_rejects_mismatched_inputs():
    sc = builtin_scenario("SA", noise=NOMINAL_NOISE)
    frames = generate_sequence(sc)[:4]
    results = run_pipeline(sc, frames)
    truths = [f.truth for f in frames]
    with pytest.raises(ValueError, match="truth frames"):
        evaluate("SA", results, truths[:3], sc.ego_origin)
    with pytest.raises(ValueError, match="line up"):
        evaluate("SA", results[1:], truths[:3], sc.ego_origin)


def test_run_is_deterministic():
    sc = builtin_scenario("SC", noise=NOMINAL_NOISE, seed=3)
    a, b = run_scenario(sc), run_scenario(sc)
    assert a.report == b.report
    assert [r.estimates for r in a.results] == [r.estimates for r in b.results]
