"""Simulate, run and score one scenario in memory."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .config import PipelineConfig
from .evaluation import FrameEval, ScenarioReport, evaluate_frame, scenario_report
from .pipeline import FrameResult, Pipeline
from .simulator import Scenario, SimFrame, TruthSnapshot, generate_sequence


@dataclass(frozen=True)
class RunOutcome:
    frames: list[SimFrame]
    results: list[FrameResult]
    evals: list[FrameEval]
    report: ScenarioReport


def run_pipeline(scenario: Scenario, frames: Sequence[SimFrame], cfg: PipelineConfig | None = None) -> list[FrameResult]:
    pl = Pipeline(scenario.camera.intrinsics, scenario.camera.extrinsics, scenario.ego_origin, cfg)
    return [pl.step(f.radar, f.depth, f.mask) for f in frames]


def evaluate(
    name: str,
    results: Sequence[FrameResult],
    truths: Sequence[TruthSnapshot],
    origin,
    cfg: PipelineConfig | None = None,
) -> tuple[list[FrameEval], ScenarioReport]:
    if len(results) != len(truths):
        raise ValueError(f"{len(results)} result frames but {len(truths)} truth frames")
    size = (cfg or PipelineConfig()).ped_box_size
    evals = []
    for r, tr in zip(results, truths):
        if abs(r.t - tr.t) > 1e-9:
            raise ValueError(f"result t={r.t} does not line up with truth t={tr.t}")
        evals.append(evaluate_frame(r.t, [e.position for e in r.estimates], tr.pedestrians, box_size=size))
    boxes = [t.box for t in results[-1].spatial.tracks] if results else []
    vehicles = {v.name: v.box for v in truths[0].vehicles} if truths else {}
    return evals, scenario_report(name, evals, origin, boxes, vehicles)


def run_scenario(
    scenario: Scenario, cfg: PipelineConfig | None = None, static_density: float = 1.0
) -> RunOutcome:
    frames = generate_sequence(scenario, static_density)
    results = run_pipeline(scenario, frames, cfg)
    evals, report = evaluate(scenario.name, results, [f.truth for f in frames], scenario.ego_origin, cfg)
    return RunOutcome(frames, results, evals, report)
