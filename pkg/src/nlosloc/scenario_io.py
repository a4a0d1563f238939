"""File formats: scenario and config JSON, JSONL frame/truth/result streams, PGM images.

Every JSON document and JSONL stream carries a format name and version.
Floats are written with Python's shortest round-trip repr, so reading a
file back yields bit-identical values and re-serialising yields identical
bytes.
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Sequence

import numpy as np

from .config import PipelineConfig
from .core import (
    AlignedBox,
    CameraIntrinsics,
    ConfigurationError,
    DepthGrid,
    Motion,
    Point2,
    RadarFrame,
    RadarPoint,
    RigidTransform,
    SegMask,
    ValidationError,
    Visibility,
)
from .evaluation import PedestrianReport, ScenarioReport, VehicleError
from .localization import TargetEstimate
from .pipeline import FrameResult
from .simulator import (
    CameraRig,
    NoiseSpec,
    PedestrianTruth,
    PointKind,
    PointLabel,
    Scenario,
    SimFrame,
    Trajectory,
    TruthSnapshot,
    Vehicle,
)
from .spatial_inference import SpatialState, VehicleTrack

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
SCENARIO_FORMAT = "nlosloc-scenario"
CONFIG_FORMAT = "nlosloc-config"
SENSORS_FORMAT = "nlosloc-sensors"
FRAMES_FORMAT = "nlosloc-frames"
TRUTH_FORMAT = "nlosloc-truth"
RESULTS_FORMAT = "nlosloc-results"
REPORT_FORMAT = "nlosloc-report"

DEPTH_SCALE = 0.0005  # metres per 16-bit depth unit
DEPTH_MAX_CODE = 65535


class ParseError(ValueError):
    """Malformed input; the message names the file, line and/or field."""


class SchemaVersionError(ValueError):
    """A file written under a different schema version."""


def dumps(obj: Any) -> str:
    """Compact, deterministic JSON; rejects NaN and infinities."""
    return json.dumps(obj, separators=(",", ":"), allow_nan=False, ensure_ascii=False)


def _pretty(obj: Any) -> str:
    return json.dumps(obj, indent=2, allow_nan=False, ensure_ascii=False) + "\n"


# -- strict field reader -------------------------------------------------------


class _Obj:
    """Reads fields out of a parsed JSON object, tracking unknown keys and paths."""

    def __init__(self, data: Any, path: str, strict: bool, source: str):
        if not isinstance(data, dict):
            raise ParseError(f"{source}: {path or 'document'} must be an object, got {type(data).__name__}")
        self.data, self.path, self.strict, self.source = data, path, strict, source
        self.used: set[str] = set()

    def _where(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def _fail(self, key: str, msg: str) -> ParseError:
        return ParseError(f"{self.source}: field '{self._where(key)}' {msg}")

    def has(self, key: str) -> bool:
        return key in self.data

    def get(self, key: str, kind: Callable[[Any, str], Any], default: Any = ...) -> Any:
        self.used.add(key)
        if key not in self.data:
            if default is ...:
                raise self._fail(key, "is missing")
            return default
        try:
            return kind(self.data[key], self._where(key))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, (ParseError, ValidationError, ConfigurationError)):
                raise
            raise self._fail(key, f"is invalid: {exc}") from None

    def sub(self, key: str, default: Any = ...) -> "_Obj | None":
        self.used.add(key)
        if key not in self.data:
            if default is ...:
                raise self._fail(key, "is missing")
            return default
        return _Obj(self.data[key], self._where(key), self.strict, self.source)

    def items(self, key: str) -> list["_Obj"]:
        self.used.add(key)
        if key not in self.data:
            raise self._fail(key, "is missing")
        val = self.data[key]
        if not isinstance(val, list):
            raise self._fail(key, "must be a list")
        return [_Obj(v, f"{self._where(key)}[{i}]", self.strict, self.source) for i, v in enumerate(val)]

    def done(self) -> None:
        unknown = sorted(set(self.data) - self.used)
        if not unknown:
            return
        msg = f"{self.source}: unknown field(s) in {self.path or 'document'}: {', '.join(unknown)}"
        if self.strict:
            raise ParseError(msg)
        log.warning("%s (ignored)", msg)


def _num(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError(f"expected a number, got {v!r}")
    return float(v)


def _int(v: Any, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError(f"expected an integer, got {v!r}")
    return v


def _str(v: Any, where: str) -> str:
    if not isinstance(v, str):
        raise TypeError(f"expected a string, got {v!r}")
    return v


def _bool(v: Any, where: str) -> bool:
    if not isinstance(v, bool):
        raise TypeError(f"expected true/false, got {v!r}")
    return v


def _vec(n: int) -> Callable[[Any, str], tuple[float, ...]]:
    def read(v: Any, where: str) -> tuple[float, ...]:
        if not isinstance(v, list) or len(v) != n:
            raise TypeError(f"expected a list of {n} numbers, got {v!r}")
        return tuple(_num(x, where) for x in v)

    return read


def _matrix3(v: Any, where: str) -> list[list[float]]:
    if not isinstance(v, list) or len(v) != 3:
        raise TypeError("expected a 3x3 nested list")
    return [list(_vec(3)(row, where)) for row in v]


def _check_version(obj: _Obj, fmt: str) -> None:
    got_fmt = obj.get("format", _str)
    if got_fmt != fmt:
        raise ParseError(f"{obj.source}: expected format '{fmt}', found '{got_fmt}'")
    got = obj.get("version", _str)
    if got != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{obj.source}: schema version {got} is not supported (this reader handles version {SCHEMA_VERSION})"
        )


def _parse_json(text: str, source: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


# -- geometry / camera ---------------------------------------------------------


def box_to_dict(b: AlignedBox) -> dict:
    return {"center": [b.center.x, b.center.y], "width": b.width, "length": b.length}


def _box(o: _Obj) -> AlignedBox:
    b = AlignedBox(Point2(*o.get("center", _vec(2))), o.get("width", _num), o.get("length", _num))
    o.done()
    return b


def intrinsics_to_dict(k: CameraIntrinsics) -> dict:
    return {"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy, "width": k.width, "height": k.height}


def _intrinsics(o: _Obj) -> CameraIntrinsics:
    k = CameraIntrinsics(
        o.get("fx", _num),
        o.get("fy", _num),
        o.get("cx", _num),
        o.get("cy", _num),
        o.get("width", _int),
        o.get("height", _int),
    )
    o.done()
    return k


def _extrinsics(o: _Obj) -> RigidTransform:
    """Either an explicit rotation/translation or a camera position plus heading."""
    if o.has("position"):
        pos = o.get("position", _vec(3))
        yaw = o.get("yaw_deg", _num, 0.0)
        o.done()
        return RigidTransform.forward_camera(pos, math.radians(yaw))
    ext = RigidTransform(np.array(o.get("rotation", _matrix3)), np.array(o.get("translation", _vec(3))))
    o.done()
    return ext


def camera_to_dict(cam: CameraRig) -> dict:
    return {"intrinsics": intrinsics_to_dict(cam.intrinsics), "extrinsics": cam.extrinsics.to_dict()}


def _camera(o: _Obj) -> CameraRig:
    rig = CameraRig(_intrinsics(o.sub("intrinsics")), _extrinsics(o.sub("extrinsics")))
    o.done()
    return rig


# -- scenarios -----------------------------------------------------------------


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "format": SCENARIO_FORMAT,
        "version": SCHEMA_VERSION,
        "name": sc.name,
        "ego_origin": [sc.ego_origin.x, sc.ego_origin.y],
        "vehicles": [{"name": v.name, **box_to_dict(v.box)} for v in sc.vehicles],
        "pedestrians": [
            {
                "id": p.ped_id,
                "waypoints": [[w.x, w.y] for w in p.waypoints],
                "speed": p.speed,
                "start_time": p.start_time,
            }
            for p in sc.pedestrians
        ],
        "camera": camera_to_dict(sc.camera),
        "frame_rate": sc.frame_rate,
        "duration": sc.duration,
        "seed": sc.seed,
        "noise": {f.name: getattr(sc.noise, f.name) for f in fields(NoiseSpec)},
        "returns_per_path": sc.returns_per_path,
        "static_spacing": sc.static_spacing,
        "vehicle_height": sc.vehicle_height,
        "ped_radius": sc.ped_radius,
        "ped_height": sc.ped_height,
        "clutter_region": list(sc.clutter_region),
    }


def scenario_from_dict(data: Any, strict: bool = True, source: str = "<scenario>") -> Scenario:
    """Build and validate a Scenario; ParseError for shape problems, ValidationError for invariants."""
    o = _Obj(data, "", strict, source)
    _check_version(o, SCENARIO_FORMAT)
    vehicles = []
    for v in o.items("vehicles"):
        name = v.get("name", _str)
        vehicles.append(Vehicle(name, _box(v)))
    peds = []
    for p in o.items("pedestrians"):
        wps = p.get("waypoints", lambda v, w: [Point2(*_vec(2)(x, w)) for x in v])
        peds.append(Trajectory(p.get("id", _str), tuple(wps), p.get("speed", _num), p.get("start_time", _num, 0.0)))
        p.done()
    noise_obj = o.sub("noise", None)
    noise = NoiseSpec()
    if noise_obj is not None:
        noise = NoiseSpec(**{f.name: noise_obj.get(f.name, _num, f.default) for f in fields(NoiseSpec)})
        noise_obj.done()
    d = Scenario.__dataclass_fields__
    sc = Scenario(
        name=o.get("name", _str),
        ego_origin=Point2(*o.get("ego_origin", _vec(2), (0.0, 0.0))),
        vehicles=tuple(vehicles),
        pedestrians=tuple(peds),
        camera=_camera(o.sub("camera")),
        frame_rate=o.get("frame_rate", _num, d["frame_rate"].default),
        duration=o.get("duration", _num, d["duration"].default),
        noise=noise,
        seed=o.get("seed", _int, 0),
        returns_per_path=o.get("returns_per_path", _int, d["returns_per_path"].default),
        static_spacing=o.get("static_spacing", _num, d["static_spacing"].default),
        vehicle_height=o.get("vehicle_height", _num, d["vehicle_height"].default),
        ped_radius=o.get("ped_radius", _num, d["ped_radius"].default),
        ped_height=o.get("ped_height", _num, d["ped_height"].default),
        clutter_region=o.get("clutter_region", _vec(4), d["clutter_region"].default),
    )
    o.done()
    return sc


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(_pretty(scenario_to_dict(sc)), encoding="utf-8")


def load_scenario(path, strict: bool = True) -> Scenario:
    p = Path(path)
    return scenario_from_dict(_parse_json(p.read_text(encoding="utf-8"), str(p)), strict, str(p))


def builtin_scenario_path(name: str) -> Path:
    return Path(__file__).parent / "scenarios" / f"{name}.json"


# -- pipeline config -----------------------------------------------------------


def config_to_dict(cfg: PipelineConfig) -> dict:
    return {"format": CONFIG_FORMAT, "version": SCHEMA_VERSION, **cfg.to_dict()}


def config_from_dict(data: Any, strict: bool = True, source: str = "<config>") -> PipelineConfig:
    """Overlay file values on the defaults. The format/version header is optional here."""
    if not isinstance(data, dict):
        raise ParseError(f"{source}: config must be a JSON object")
    body = dict(data)
    if "version" in body or "format" in body:
        head = {"format": body.pop("format", CONFIG_FORMAT), "version": body.pop("version", None)}
        _check_version(_Obj(head, "", True, source), CONFIG_FORMAT)
    try:
        return PipelineConfig.from_dict(body, strict=strict)
    except TypeError as exc:
        raise ParseError(f"{source}: {exc}") from None


def load_config(path, strict: bool = True) -> PipelineConfig:
    p = Path(path)
    return config_from_dict(_parse_json(p.read_text(encoding="utf-8"), str(p)), strict, str(p))


def save_config(cfg: PipelineConfig, path) -> None:
    Path(path).write_text(_pretty(config_to_dict(cfg)), encoding="utf-8")


# -- sensors -------------------------------------------------------------------


@dataclass(frozen=True)
class SensorSetup:
    intrinsics: CameraIntrinsics
    extrinsics: RigidTransform
    origin: Point2


def save_sensors(setup: SensorSetup, path) -> None:
    doc = {
        "format": SENSORS_FORMAT,
        "version": SCHEMA_VERSION,
        "intrinsics": intrinsics_to_dict(setup.intrinsics),
        "extrinsics": setup.extrinsics.to_dict(),
        "origin": [setup.origin.x, setup.origin.y],
    }
    Path(path).write_text(_pretty(doc), encoding="utf-8")


def load_sensors(path, strict: bool = True) -> SensorSetup:
    p = Path(path)
    o = _Obj(_parse_json(p.read_text(encoding="utf-8"), str(p)), "", strict, str(p))
    _check_version(o, SENSORS_FORMAT)
    setup = SensorSetup(_intrinsics(o.sub("intrinsics")), _extrinsics(o.sub("extrinsics")), Point2(*o.get("origin", _vec(2))))
    o.done()
    return setup


# -- JSONL streams -------------------------------------------------------------


def _header(fmt: str, **meta) -> dict:
    return {"format": fmt, "version": SCHEMA_VERSION, **meta}


def write_jsonl(path, header: dict, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(header) + "\n")
        for rec in records:
            fh.write(dumps(rec) + "\n")


def read_jsonl(path, fmt: str) -> tuple[dict, Iterator[tuple[int, Any]]]:
    """Header dict plus (line number, parsed object) for each record line."""
    p = Path(path)
    lines = p.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError(f"{p}: empty file, expected a '{fmt}' header line")
    head = _parse_json(lines[0], f"{p}, line 1")
    if not isinstance(head, dict):
        raise ParseError(f"{p}, line 1: header must be a JSON object")
    _check_version(_Obj({"format": head.get("format"), "version": head.get("version")}, "", True, f"{p}, line 1"), fmt)

    def records() -> Iterator[tuple[int, Any]]:
        for n, line in enumerate(lines[1:], start=2):
            if line.strip():
                yield n, _parse_json(line, f"{p}, line {n}")

    return head, records()


def _record(parse: Callable[[_Obj], Any], data: Any, where: str, strict: bool) -> Any:
    try:
        o = _Obj(data, "", strict, where)
        out = parse(o)
        o.done()
        return out
    except (ValidationError, ConfigurationError) as exc:
        raise ParseError(f"{where}: {exc}") from None


# frames ------------------------------------------------------------------------


def frame_to_dict(index: int, radar: RadarFrame, depth_file: str | None, mask_file: str | None) -> dict:
    return {
        "index": index,
        "t": radar.timestamp,
        "points": [[p.id, p.position.x, p.position.y, p.motion.value] for p in radar.points],
        "depth": depth_file,
        "mask": mask_file,
    }


def _point(v: Any, where: str) -> RadarPoint:
    if not isinstance(v, list) or len(v) != 4:
        raise TypeError("radar point must be [id, x, y, motion]")
    return RadarPoint(Point2(_num(v[1], where), _num(v[2], where)), Motion(_str(v[3], where)), _int(v[0], where))


@dataclass(frozen=True)
class FrameRecord:
    index: int
    radar: RadarFrame
    depth_file: str | None
    mask_file: str | None


def _frame(o: _Obj) -> FrameRecord:
    pts = o.get("points", lambda v, w: [_point(x, w) for x in v])
    return FrameRecord(
        o.get("index", _int),
        RadarFrame(o.get("t", _num), tuple(pts)),
        o.get("depth", lambda v, w: None if v is None else _str(v, w), None),
        o.get("mask", lambda v, w: None if v is None else _str(v, w), None),
    )


def write_frames(path, records: Iterable[FrameRecord]) -> None:
    write_jsonl(
        path, _header(FRAMES_FORMAT), (frame_to_dict(r.index, r.radar, r.depth_file, r.mask_file) for r in records)
    )


def read_frames(path, strict: bool = True) -> list[FrameRecord]:
    _, recs = read_jsonl(path, FRAMES_FORMAT)
    return [_record(_frame, data, f"{path}, line {n}", strict) for n, data in recs]


# truth -------------------------------------------------------------------------


def _label_to_dict(lab: PointLabel) -> dict:
    d = {"kind": lab.kind.value}
    for k in ("ped_id", "path", "vehicle", "edge_index"):
        if getattr(lab, k) is not None:
            d[k] = getattr(lab, k)
    return d


def truth_to_dict(index: int, snap: TruthSnapshot) -> dict:
    return {
        "index": index,
        "t": snap.t,
        "pedestrians": [
            {
                "id": p.ped_id,
                "position": [p.position.x, p.position.y],
                "visibility": p.visibility.value,
                "radar_los": p.radar_los,
            }
            for p in snap.pedestrians
        ],
        "vehicles": [{"name": v.name, **box_to_dict(v.box)} for v in snap.vehicles],
        "labels": [[pid, _label_to_dict(lab)] for pid, lab in sorted(snap.labels.items())],
    }


def _label(v: Any, where: str) -> tuple[int, PointLabel]:
    if not isinstance(v, list) or len(v) != 2:
        raise TypeError("label entry must be [point id, label]")
    o = _Obj(v[1], where, True, where)
    lab = PointLabel(
        PointKind(o.get("kind", _str)),
        o.get("ped_id", _str, None),
        o.get("path", _str, None),
        o.get("vehicle", _str, None),
        o.get("edge_index", _int, None),
    )
    o.done()
    return _int(v[0], where), lab


def _truth(o: _Obj) -> tuple[int, TruthSnapshot]:
    peds = []
    for p in o.items("pedestrians"):
        peds.append(
            PedestrianTruth(
                p.get("id", _str),
                Point2(*p.get("position", _vec(2))),
                Visibility(p.get("visibility", _str)),
                p.get("radar_los", _bool),
            )
        )
        p.done()
    vehicles = tuple(Vehicle(v.get("name", _str), _box(v)) for v in o.items("vehicles"))
    labels = dict(o.get("labels", lambda v, w: [_label(x, w) for x in v], []))
    return o.get("index", _int), TruthSnapshot(o.get("t", _num), tuple(peds), vehicles, labels)


def write_truth(path, snapshots: Sequence[TruthSnapshot], scenario: Scenario | None = None) -> None:
    meta = {"scenario": scenario.name} if scenario else {}
    write_jsonl(path, _header(TRUTH_FORMAT, **meta), (truth_to_dict(i, s) for i, s in enumerate(snapshots)))


def read_truth(path, strict: bool = True) -> list[TruthSnapshot]:
    _, recs = read_jsonl(path, TRUTH_FORMAT)
    return [_record(_truth, data, f"{path}, line {n}", strict)[1] for n, data in recs]


# results -----------------------------------------------------------------------


def _plain(v: Any) -> Any:
    """Diagnostics to JSON-able values."""
    if isinstance(v, AlignedBox):
        return box_to_dict(v)
    if isinstance(v, Point2):
        return [v.x, v.y]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.integer, np.floating, np.bool_)):
        return v.item()
    return v


def state_to_dict(s: SpatialState) -> dict:
    return {
        "tracks": [
            {
                "id": t.track_id,
                "box": box_to_dict(t.box),
                "history": [box_to_dict(b) for b in t.history],
                "seen": t.seen,
            }
            for t in s.tracks
        ],
        "fixed": s.fixed,
        "gap_frame": s.gap_frame,
        "next_id": s.next_id,
        "diagnostics": _plain(s.diagnostics),
    }


def _state(o: _Obj) -> SpatialState:
    tracks = []
    for t in o.items("tracks"):
        tracks.append(
            VehicleTrack(
                t.get("id", _int),
                tuple(_box(h) for h in t.items("history")),
                _box(t.sub("box")),
                t.get("seen", _bool),
            )
        )
        t.done()
    return SpatialState(
        tuple(tracks),
        o.get("fixed", _bool),
        o.get("gap_frame", _bool),
        o.get("next_id", _int),
        o.get("diagnostics", lambda v, w: v, {}),
    )


def result_to_dict(r: FrameResult) -> dict:
    return {
        "t": r.t,
        "spatial": state_to_dict(r.spatial),
        "estimates": [
            {
                "position": [e.position.x, e.position.y],
                "support": e.support,
                "direct": e.direct_count,
                "reflected": e.reflected_count,
                "cluster_id": e.cluster_id,
            }
            for e in r.estimates
        ],
        "diagnostics": _plain(r.diagnostics),
    }


def _result(o: _Obj) -> FrameResult:
    ests = []
    for e in o.items("estimates"):
        ests.append(
            TargetEstimate(
                Point2(*e.get("position", _vec(2))),
                e.get("support", _int),
                e.get("direct", _int),
                e.get("reflected", _int),
                e.get("cluster_id", _int),
            )
        )
        e.done()
    st = o.sub("spatial")
    state = _state(st)
    st.done()
    return FrameResult(o.get("t", _num), state, tuple(ests), o.get("diagnostics", lambda v, w: v, {}))


@dataclass(frozen=True)
class RunRecord:
    """One pipeline run: what was run, with which settings, and what came out.

    `scenario` is the scenario document when the input was simulated; with it
    and `config` the run can be regenerated exactly.
    """

    scenario_id: str
    config: PipelineConfig
    results: tuple[FrameResult, ...]
    scenario: dict | None = None
    meta: dict = field(default_factory=dict)


def write_results(path, run: RunRecord) -> None:
    header = _header(
        RESULTS_FORMAT,
        scenario_id=run.scenario_id,
        config=run.config.to_dict(),
        scenario=run.scenario,
        meta=run.meta,
    )
    write_jsonl(path, header, (result_to_dict(r) for r in run.results))


def read_results(path, strict: bool = True) -> RunRecord:
    head, recs = read_jsonl(path, RESULTS_FORMAT)
    where = f"{path}, line 1"
    ho = _Obj(head, "", strict, where)
    ho.get("format", _str)
    ho.get("version", _str)
    scenario_id = ho.get("scenario_id", _str)
    try:
        cfg = PipelineConfig.from_dict(ho.get("config", lambda v, w: v), strict=strict)
    except (TypeError, ConfigurationError) as exc:
        raise ParseError(f"{where}: config: {exc}") from None
    scenario = ho.get("scenario", lambda v, w: v, None)
    meta = ho.get("meta", lambda v, w: v, {})
    ho.done()
    results = tuple(_record(_result, data, f"{path}, line {n}", strict) for n, data in recs)
    return RunRecord(scenario_id, cfg, results, scenario, meta)


# reports -----------------------------------------------------------------------


def report_to_dict(r: ScenarioReport) -> dict:
    return {"format": REPORT_FORMAT, "version": SCHEMA_VERSION, **_plain(r.to_dict())}


def report_from_dict(data: Any, source: str = "<report>") -> ScenarioReport:
    o = _Obj(data, "", False, source)
    _check_version(o, REPORT_FORMAT)
    opt = lambda v, w: None if v is None else _num(v, w)  # noqa: E731
    peds = []
    for p in o.items("pedestrians"):
        peds.append(
            PedestrianReport(
                p.get("ped_id", _str),
                p.get("target", _bool),
                *(p.get(k, opt) for k in ("t_los", "t_full", "t_idp", "idp", "tta")),
                p.get("n_window", _int),
                p.get("n_hit", _int),
                p.get("accuracy", opt),
                p.get("ae", opt),
            )
        )
    vehicles = []
    for v in o.items("vehicles"):
        est = v.get("estimate", lambda x, w: None if x is None else Point2(*_vec(2)(x, w)))
        vehicles.append(VehicleError(v.get("name", _str), Point2(*v.get("truth", _vec(2))), est, v.get("error", opt)))
    return ScenarioReport(
        o.get("scenario", _str),
        tuple(peds),
        o.get("accuracy", opt),
        o.get("ae", opt),
        tuple(vehicles),
        o.get("n_frames", _int),
    )


def save_report(r: ScenarioReport, path) -> None:
    Path(path).write_text(_pretty(report_to_dict(r)), encoding="utf-8")


def load_report(path) -> ScenarioReport:
    p = Path(path)
    return report_from_dict(_parse_json(p.read_text(encoding="utf-8"), str(p)), str(p))


# -- PGM images ----------------------------------------------------------------

_TOKEN = re.compile(rb"#[^\n]*\n?|\S+")


def _write_pgm(path, pixels: np.ndarray, maxval: int, comments: Sequence[str] = ()) -> None:
    h, w = pixels.shape
    head = b"P5\n" + b"".join(f"# {c}\n".encode() for c in comments) + f"{w} {h}\n{maxval}\n".encode()
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as fh:
        fh.write(head + np.ascontiguousarray(pixels, dtype=dtype).tobytes())


def _read_pgm(path) -> tuple[np.ndarray, int, list[str]]:
    raw = Path(path).read_bytes()
    tokens, comments, pos = [], [], 0
    while len(tokens) < 4:
        m = _TOKEN.search(raw, pos)
        if m is None:
            raise ParseError(f"{path}: truncated PGM header")
        tok = m.group(0)
        pos = m.end()
        if tok.startswith(b"#"):
            comments.append(tok[1:].strip().decode("ascii", "replace"))
        else:
            tokens.append(tok)
    if tokens[0] != b"P5":
        raise ParseError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ParseError(f"{path}: bad PGM header values") from None
    pos += 1  # single whitespace after maxval
    dtype = ">u2" if maxval > 255 else "u1"
    n = w * h * np.dtype(dtype).itemsize
    data = raw[pos : pos + n]
    if len(data) != n:
        raise ParseError(f"{path}: expected {n} bytes of pixel data, found {len(data)}")
    return np.frombuffer(data, dtype=dtype).reshape(h, w).astype(np.int64), maxval, comments


def save_depth_pgm(depth: DepthGrid, path, scale: float = DEPTH_SCALE) -> None:
    """16-bit depth; code = round(depth / scale), 0 marks invalid or out-of-range pixels."""
    codes = np.rint(depth.values / scale)
    codes[(depth.values <= 0) | (codes > DEPTH_MAX_CODE) | ~np.isfinite(codes)] = 0
    _write_pgm(path, codes.astype(np.uint16), DEPTH_MAX_CODE, [f"scale {scale!r}"])


def load_depth_pgm(path, scale: float | None = None) -> DepthGrid:
    codes, maxval, comments = _read_pgm(path)
    if scale is None:
        found = [c.split()[1] for c in comments if c.startswith("scale ") and len(c.split()) == 2]
        if not found:
            raise ParseError(f"{path}: depth PGM lacks a '# scale <metres per unit>' comment")
        scale = float(found[0])
    h, w = codes.shape
    return DepthGrid(w, h, codes * scale)


def save_mask_pgm(mask: SegMask, path) -> None:
    _write_pgm(path, mask.values * 255, 255)


def load_mask_pgm(path) -> SegMask:
    px, _, _ = _read_pgm(path)
    h, w = px.shape
    return SegMask(w, h, (px > 0).astype(np.uint8))


# -- simulated run directories -------------------------------------------------


def write_sim_dir(out: Path, scenario: Scenario, frames: Sequence[SimFrame]) -> None:
    """Lay out a simulated run: frames.jsonl, truth.jsonl, sensors.json, scenario.json, depth/, mask/."""
    out = Path(out)
    (out / "depth").mkdir(parents=True, exist_ok=True)
    (out / "mask").mkdir(parents=True, exist_ok=True)
    recs = []
    for f in frames:
        dname, mname = f"depth/{f.index:06d}.pgm", f"mask/{f.index:06d}.pgm"
        save_depth_pgm(f.depth, out / dname)
        save_mask_pgm(f.mask, out / mname)
        recs.append(FrameRecord(f.index, f.radar, dname, mname))
    write_frames(out / "frames.jsonl", recs)
    write_truth(out / "truth.jsonl", [f.truth for f in frames], scenario)
    save_sensors(SensorSetup(scenario.camera.intrinsics, scenario.camera.extrinsics, scenario.ego_origin), out / "sensors.json")
    save_scenario(scenario, out / "scenario.json")


def load_frame_images(root: Path, rec: FrameRecord, setup: SensorSetup) -> tuple[DepthGrid, SegMask]:
    k = setup.intrinsics
    if rec.depth_file is None:
        depth = DepthGrid(k.width, k.height, np.zeros((k.height, k.width)))
    else:
        depth = load_depth_pgm(Path(root) / rec.depth_file)
    if rec.mask_file is None:
        mask = SegMask.empty(k.width, k.height)
    else:
        mask = load_mask_pgm(Path(root) / rec.mask_file)
    if depth.values.shape != (k.height, k.width) or mask.values.shape != (k.height, k.width):
        raise ParseError(f"frame {rec.index}: image size does not match the {k.width}x{k.height} camera")
    return depth, mask


def file_tree(root) -> list[str]:
    """Relative paths of all files under root, sorted (used for determinism checks)."""
    root = Path(root)
    return sorted(str(p.relative_to(root)).replace(os.sep, "/") for p in root.rglob("*") if p.is_file())
