"""Command-line driver: simulate, run, eval, report, sweep.

Exit codes: 0 success, 1 bad input or failed validation, 2 environment or I/O failure.
Set NLOS_LOG to a logging level name (DEBUG, INFO, ...) for more output.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import PipelineConfig, field_names
from .core import ConfigurationError, Point2, ValidationError
from .evaluation import (
    TABLE1_COLUMNS,
    TABLE2_COLUMNS,
    ScenarioReport,
    aggregate,
    table1_rows,
    table2_rows,
    to_csv,
)
from .experiment import evaluate, run_scenario
from .pipeline import Pipeline
from .plotting import bars_svg, overlay_svg, timeline_svg
from .scenario_io import (
    ParseError,
    RunRecord,
    SchemaVersionError,
    config_from_dict,
    dumps,
    load_config,
    load_frame_images,
    load_report,
    load_scenario,
    load_sensors,
    read_frames,
    read_results,
    read_truth,
    report_to_dict,
    save_report,
    scenario_to_dict,
    write_results,
    write_sim_dir,
)
from .simulator import NOMINAL_NOISE, ZERO_NOISE, Scenario, builtin_scenario, generate_sequence

log = logging.getLogger("nlosloc")

BUILTINS = ("SA", "SB", "SC")
NOISE_PRESETS = {"zero": ZERO_NOISE, "nominal": NOMINAL_NOISE}

EXIT_OK, EXIT_USER, EXIT_ENV = 0, 1, 2


class UserError(Exception):
    """Reported with exit code 1."""


# -- helpers -------------------------------------------------------------------


def _json_file(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def _need(path: Path, what: str) -> Path:
    if not path.exists():
        raise UserError(f"missing {what}: {path}")
    return path


def _publish(tmp: Path, out: Path) -> None:
    """Move a finished staging directory's contents into `out`."""
    out.mkdir(parents=True, exist_ok=True)
    for item in sorted(tmp.iterdir()):
        dest = out / item.name
        if dest.is_dir():
            shutil.rmtree(dest)
        elif dest.exists():
            dest.unlink()
        shutil.move(str(item), str(dest))
    tmp.rmdir()


class _Staging:
    """Write into a temporary sibling of `out` and publish only on success."""

    def __init__(self, out: Path):
        self.out = out

    def __enter__(self) -> Path:
        parent = self.out.resolve().parent
        parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=f".{self.out.name}.", dir=parent))
        return self.tmp

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            _publish(self.tmp, self.out)
        else:
            shutil.rmtree(self.tmp, ignore_errors=True)


def resolve_scenario(spec: str, seed: int | None, noise: str | None, gap_width: float | None) -> Scenario:
    """A built-in name (SA/SB/SC) or a path to a scenario JSON file."""
    if spec in BUILTINS:
        kw = {"gap_width": gap_width} if gap_width is not None else {}
        return builtin_scenario(
            spec,
            noise=NOISE_PRESETS[noise or "nominal"],
            seed=0 if seed is None else seed,
            **kw,
        )
    path = Path(spec)
    if not path.exists():
        raise UserError(f"scenario {spec!r} is neither a built-in ({', '.join(BUILTINS)}) nor an existing file")
    if gap_width is not None:
        raise UserError("--gap-width only applies to built-in scenarios")
    sc = load_scenario(path)
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if noise is not None:
        changes["noise"] = NOISE_PRESETS[noise]
    return replace(sc, **changes) if changes else sc


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_config(config_path: str | None, overrides: Sequence[str]) -> PipelineConfig:
    """Defaults, then the config file, then --set key=value flags."""
    data = {}
    if config_path:
        data = load_config(_need(Path(config_path), "config file")).to_dict()
    for item in overrides:
        if "=" not in item:
            raise UserError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        data[k.strip()] = _parse_value(v)
    return config_from_dict(data, strict=True, source="configuration")


# -- simulate ------------------------------------------------------------------


def cmd_simulate(args) -> int:
    sc = resolve_scenario(args.scenario, args.seed, args.noise, args.gap_width)
    frames = generate_sequence(sc, args.static_density_factor)
    out = Path(args.out)
    with _Staging(out) as tmp:
        write_sim_dir(tmp, sc, frames)
    print(f"simulated {sc.name}: {len(frames)} frames (seed {sc.seed}) -> {out}")
    return EXIT_OK


# -- run -----------------------------------------------------------------------


def cmd_run(args) -> int:
    src = Path(args.inp)
    sensors = load_sensors(_need(src / "sensors.json", "sensors.json"))
    records = read_frames(_need(src / "frames.jsonl", "frames.jsonl"))
    cfg = build_config(args.config, args.set)
    scenario_doc = None
    scenario_id = src.name
    if (src / "scenario.json").exists():
        sc = load_scenario(src / "scenario.json")
        scenario_doc, scenario_id = scenario_to_dict(sc), sc.name

    pl = Pipeline(sensors.intrinsics, sensors.extrinsics, sensors.origin, cfg)
    results = []
    t0 = time.perf_counter()
    for rec in records:
        depth, mask = load_frame_images(src, rec, sensors)
        try:
            results.append(pl.step(rec.radar, depth, mask))
        except ValueError as exc:
            raise UserError(f"frame {rec.index}: {exc}") from None
    elapsed = time.perf_counter() - t0
    run = RunRecord(
        scenario_id,
        cfg,
        tuple(results),
        scenario_doc,
        {"origin": [sensors.origin.x, sensors.origin.y], "source": "frames.jsonl"},
    )
    out = Path(args.out)
    with _Staging(out) as tmp:
        write_results(tmp / "results.jsonl", run)
    rate = len(results) / elapsed if elapsed > 0 else float("inf")
    print(f"run {scenario_id}: {len(results)} frames in {elapsed:.2f} s ({rate:.1f} frames/s) -> {out}")
    return EXIT_OK


# -- eval ----------------------------------------------------------------------


def _results_path(p: Path) -> Path:
    return p / "results.jsonl" if p.is_dir() else p


def evaluate_run(run: RunRecord, truths, name: str | None = None):
    origin = Point2(*run.meta.get("origin", (0.0, 0.0)))
    try:
        evals, report = evaluate(name or run.scenario_id, run.results, truths, origin, run.config)
    except ValueError as exc:
        raise UserError(f"run and truth do not match: {exc}") from None
    boxes = [t.box for t in run.results[-1].spatial.tracks] if run.results else []
    vehicles = {v.name: v.box for v in truths[0].vehicles} if truths else {}
    return evals, report, origin, boxes, vehicles


def _eval_frame_dict(ev) -> dict:
    return {
        "t": ev.t,
        "visibility": {k: v.value for k, v in sorted(ev.visibility.items())},
        "matches": [
            {"ped_id": m.ped_id, "estimate": [m.estimate.x, m.estimate.y], "truth": [m.truth.x, m.truth.y], "iou": m.iou, "error": m.error}
            for m in ev.matches
        ],
        "unmatched": ev.unmatched,
    }


def cmd_eval(args) -> int:
    run = read_results(_need(_results_path(Path(args.run)), "results.jsonl"))
    truths = read_truth(_need(Path(args.truth), "truth file"))
    evals, report, origin, boxes, vehicles = evaluate_run(run, truths, args.name)
    out = Path(args.out)
    with _Staging(out) as tmp:
        save_report(report, tmp / "report.json")
        (tmp / "table2.csv").write_text(to_csv(table2_rows([report]), TABLE2_COLUMNS), encoding="utf-8")
        (tmp / "table1.csv").write_text(to_csv(table1_rows([report]), TABLE1_COLUMNS), encoding="utf-8")
        with open(tmp / "eval_frames.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            for ev in evals:
                fh.write(dumps(_eval_frame_dict(ev)) + "\n")
        tracks = {}
        for tr in truths:
            for p in tr.pedestrians:
                tracks.setdefault(p.ped_id, []).append(p.position)
        ests = [e.position for r in run.results for e in r.estimates]
        (tmp / "overlay.svg").write_text(
            overlay_svg(report.scenario, list(vehicles.values()), boxes, tracks, ests, origin), encoding="utf-8"
        )
        (tmp / "timeline.svg").write_text(timeline_svg(report.scenario, evals), encoding="utf-8")
    acc = "n/a" if report.accuracy is None else f"{report.accuracy:.4f}"
    ae = "n/a" if report.ae is None else f"{report.ae:.3f} m"
    print(f"eval {report.scenario}: accuracy {acc}, AE {ae}, IDP {report.idp}, TTA {report.tta} -> {out}")
    return EXIT_OK


# -- report --------------------------------------------------------------------


def _load_reports(dirs: Sequence[str]) -> list[tuple[Path, ScenarioReport]]:
    out = []
    for d in dirs:
        p = Path(d)
        out.append((p, load_report(_need(p / "report.json" if p.is_dir() else p, "report.json"))))
    return out


def cmd_report(args) -> int:
    runs = _load_reports(args.runs)
    refs = [r for _, r in _load_reports(args.reference or [])]
    reports = [r for _, r in runs]
    out = Path(args.out)
    with _Staging(out) as tmp:
        t2 = table2_rows(reports)
        t1 = table1_rows(reports, refs)
        (tmp / "table2.csv").write_text(to_csv(t2, TABLE2_COLUMNS), encoding="utf-8")
        (tmp / "table1.csv").write_text(to_csv(t1, TABLE1_COLUMNS), encoding="utf-8")
        _json_file(tmp / "table2.json", t2)
        _json_file(tmp / "table1.json", t1)
        _json_file(tmp / "reports.json", [report_to_dict(r) for r in reports])
        (tmp / "accuracy.svg").write_text(
            bars_svg("accuracy", [r.scenario for r in reports], [r.accuracy for r in reports]), encoding="utf-8"
        )
        for i, (p, r) in enumerate(runs):
            src = (p if p.is_dir() else p.parent) / "overlay.svg"
            if src.exists():
                shutil.copyfile(src, tmp / f"{i:02d}_{r.scenario}_overlay.svg")
    print(f"report over {len(reports)} run(s) -> {out}")
    return EXIT_OK


# -- sweep ---------------------------------------------------------------------

SWEEP_PARAMS = ("gap_width", "static_density", "noise.<field>", "<pipeline config key>")


def _sweep_job(job: tuple) -> dict:
    scenario_name, param, value, seed, noise, cfg_dict = job
    cfg = PipelineConfig.from_dict(cfg_dict)
    density = 1.0
    kw = {}
    if param == "gap_width":
        kw["gap_width"] = float(value)
    elif param == "static_density":
        density = float(value)
    sc = builtin_scenario(scenario_name, noise=NOISE_PRESETS[noise], seed=seed, **kw)
    if param.startswith("noise."):
        sc = replace(sc, noise=replace(sc.noise, **{param[len("noise.") :]: float(value)}))
    elif param in field_names():
        cfg = cfg.replace(**{param: value})
    rep = run_scenario(sc, cfg, density).report
    errs = [v.error for v in rep.vehicles if v.error is not None]
    return {
        "value": value,
        "seed": seed,
        "accuracy": rep.accuracy,
        "ae": rep.ae,
        "idp": rep.idp,
        "tta": rep.tta,
        "vehicle_error": sum(errs) / len(errs) if errs else None,
    }


def _parse_seeds(text: str) -> list[int]:
    seeds = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-", 1)
            seeds.extend(range(int(a), int(b) + 1))
        elif part.strip():
            seeds.append(int(part))
    return seeds


def cmd_sweep(args) -> int:
    param = args.param
    if not (param in ("gap_width", "static_density") or param.startswith("noise.") or param in field_names()):
        raise UserError(f"unknown sweep parameter {param!r}; choose from {', '.join(SWEEP_PARAMS)}")
    if args.scenario not in BUILTINS:
        raise UserError("sweep runs over built-in scenarios (SA, SB, SC)")
    values = [_parse_value(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise UserError("--values is empty")
    try:
        seeds = _parse_seeds(args.seeds)
    except ValueError:
        raise UserError(f"bad --seeds {args.seeds!r}; use e.g. 0-9 or 1,2,5") from None
    cfg = build_config(args.config, args.set)
    # fail fast on bad values before spending time on runs
    for v in values:
        if param in field_names():
            cfg.replace(**{param: v})
        elif param.startswith("noise."):
            replace(NOISE_PRESETS[args.noise], **{param[len("noise.") :]: float(v)})
    jobs = [(args.scenario, param, v, s, args.noise, cfg.to_dict()) for v in values for s in seeds]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]

    metrics = ("accuracy", "ae", "idp", "tta", "vehicle_error")
    agg = []
    for v in values:
        mine = [r for r in rows if r["value"] == v]
        row = {"param": param, "value": v, "n_runs": len(mine)}
        for m in metrics:
            a = aggregate(r[m] for r in mine)
            row[f"{m}_mean"], row[f"{m}_std"] = a.mean, a.std
        agg.append(row)
    cols = ["param", "value", "n_runs"] + [f"{m}_{s}" for m in metrics for s in ("mean", "std")]
    out = Path(args.out)
    with _Staging(out) as tmp:
        (tmp / "sweep.csv").write_text(to_csv(agg, cols), encoding="utf-8")
        _json_file(tmp / "sweep.json", {"aggregate": agg, "runs": rows})
    print(f"sweep {param} over {len(values)} value(s) x {len(seeds)} seed(s) -> {out}")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nlosloc",
        description="Camera-guided radar localisation of pedestrians hidden between parked cars.",
        epilog="Exit codes: 0 ok, 1 invalid input, 2 I/O or environment error. Log level: NLOS_LOG.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="{simulate,run,eval,report,sweep}")

    s = sub.add_parser("simulate", help="generate sensor frames and ground truth for a scenario")
    s.add_argument("--scenario", required=True, help="SA, SB, SC or a scenario JSON file")
    s.add_argument("--seed", type=int, help="random seed (default 0 or the file's seed)")
    s.add_argument("--noise", choices=sorted(NOISE_PRESETS), help="noise preset (built-ins default to nominal)")
    s.add_argument("--gap-width", type=float, help="gap between the parked cars, built-ins only (m)")
    s.add_argument(
        "--static-density-factor", type=float, default=1.0, help="multiply static radar sampling density (dense reference mode)"
    )
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("run", help="run the localisation pipeline over a frame directory")
    r.add_argument("--in", dest="inp", required=True, help="directory written by simulate (or equivalent)")
    r.add_argument("--config", help="pipeline config JSON")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config value")
    r.add_argument("--out", required=True, help="output directory for results.jsonl")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("eval", help="score a run against ground truth")
    e.add_argument("--run", required=True, help="run directory or results.jsonl")
    e.add_argument("--truth", required=True, help="truth.jsonl from simulate")
    e.add_argument("--name", help="scenario label in the report (default: the run's scenario id)")
    e.add_argument("--out", required=True, help="output directory")
    e.set_defaults(func=cmd_eval)

    rp = sub.add_parser("report", help="collect eval outputs into table CSVs and SVG plots")
    rp.add_argument("--runs", nargs="+", required=True, help="eval output directories")
    rp.add_argument("--reference", nargs="*", help="eval directories of dense-reference runs, matched by scenario")
    rp.add_argument("--out", required=True, help="output directory")
    rp.set_defaults(func=cmd_report)

    sw = sub.add_parser("sweep", help="grid over one parameter and aggregate metrics over seeds")
    sw.add_argument("--scenario", default="SA", help="built-in scenario (default SA)")
    sw.add_argument("--param", required=True, help=f"one of: {', '.join(SWEEP_PARAMS)}")
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--seeds", default="0-4", help="seed list, e.g. 0-9 or 1,3,5 (default 0-4)")
    sw.add_argument("--noise", choices=sorted(NOISE_PRESETS), default="nominal")
    sw.add_argument("--config", help="pipeline config JSON")
    sw.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    sw.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    sw.add_argument("--out", required=True, help="output directory")
    sw.set_defaults(func=cmd_sweep)
    return p


def _setup_logging() -> None:
    level = os.environ.get("NLOS_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UserError, ParseError, SchemaVersionError, ValidationError, ConfigurationError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_ENV


if __name__ == "__main__":
    sys.exit(main())
