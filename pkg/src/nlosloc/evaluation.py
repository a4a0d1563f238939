"""Localisation and reflector-map metrics, plus table-shaped reports."""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

from .core import AlignedBox, Point2, Visibility

CORRECT_THRESHOLD = 0.2  # m
IOU_THRESHOLD = 0.2
ASSOCIATION_GATE = 2.0  # m
PED_BOX_SIZE = 1.7  # m
TIME_SLACK = 1e-9


def euclid_error(pred, gt) -> float:
    p, g = Point2(*pred), Point2(*gt)
    return math.hypot(p.x - g.x, p.y - g.y)


def is_correct(error: float, threshold: float = CORRECT_THRESHOLD) -> bool:
    return error <= threshold


def iou(a: AlignedBox, b: AlignedBox) -> float:
    ix = max(0.0, min(a.x_max, b.x_max) - max(a.x_min, b.x_min))
    iy = max(0.0, min(a.y_max, b.y_max) - max(a.y_min, b.y_min))
    inter = ix * iy
    union = a.area + b.area - inter
    return min(1.0, inter / union) if union > 0 else 0.0


def detected(overlap: float) -> bool:
    """A localisation counts when the boxes overlap by more than the threshold."""
    return overlap > IOU_THRESHOLD


def ped_box(p, size: float = PED_BOX_SIZE) -> AlignedBox:
    return AlignedBox(Point2(*p), size, size)


# -- per-frame evaluation ----------------------------------------------------


class PedestrianLike(Protocol):
    ped_id: str
    position: Point2
    visibility: Visibility


@dataclass(frozen=True)
class Match:
    ped_id: str
    estimate: Point2
    truth: Point2
    iou: float
    error: float

    def __post_init__(self):
        if not 0.0 <= self.iou <= 1.0:
            raise ValueError(f"iou {self.iou} outside [0, 1]")
        if not self.error >= 0.0:
            raise ValueError(f"negative error {self.error}")

    @property
    def hit(self) -> bool:
        return detected(self.iou)


@dataclass(frozen=True)
class FrameEval:
    t: float
    matches: tuple[Match, ...] = ()
    visibility: Mapping[str, Visibility] = field(default_factory=dict)
    truths: Mapping[str, Point2] = field(default_factory=dict)
    unmatched: int = 0  # estimates with no pedestrian inside the gate

    def match_for(self, ped_id: str) -> Match | None:
        return next((m for m in self.matches if m.ped_id == ped_id), None)


def associate(
    estimates: Sequence[Point2],
    truths: Mapping[str, Point2],
    gate: float = ASSOCIATION_GATE,
    box_size: float = PED_BOX_SIZE,
) -> tuple[list[Match], int]:
    """Greedy nearest-first pairing of estimates to pedestrians within `gate` metres."""
    pairs = sorted(
        (euclid_error(e, g), ei, pid)
        for ei, e in enumerate(estimates)
        for pid, g in truths.items()
    )
    used_e: set[int] = set()
    used_p: set[str] = set()
    out = []
    for d, ei, pid in pairs:
        if d > gate:
            break
        if ei in used_e or pid in used_p:
            continue
        used_e.add(ei)
        used_p.add(pid)
        e, g = Point2(*estimates[ei]), truths[pid]
        out.append(Match(pid, e, g, iou(ped_box(e, box_size), ped_box(g, box_size)), d))
    out.sort(key=lambda m: m.ped_id)
    return out, len(estimates) - len(used_e)


def evaluate_frame(
    t: float,
    estimates: Sequence[Point2],
    pedestrians: Iterable[PedestrianLike],
    gate: float = ASSOCIATION_GATE,
    box_size: float = PED_BOX_SIZE,
) -> FrameEval:
    peds = list(pedestrians)
    truths = {p.ped_id: Point2(*p.position) for p in peds}
    matches, unmatched = associate(estimates, truths, gate, box_size)
    return FrameEval(t, tuple(matches), {p.ped_id: p.visibility for p in peds}, truths, unmatched)


# -- timeline metrics --------------------------------------------------------


@dataclass(frozen=True)
class Detection:
    t: float
    idp: float  # |x_gt - x_O| at the first NLoS detection


def first_time(evals: Sequence[FrameEval], ped_id: str, level: Visibility) -> float | None:
    """First frame at which the pedestrian is at least `level` visible."""
    order = [Visibility.NLOS, Visibility.PARTIAL, Visibility.FULL]
    need = order.index(level)
    for ev in evals:
        v = ev.visibility.get(ped_id)
        if v is not None and order.index(v) >= need:
            return ev.t
    return None


def idp(evals: Sequence[FrameEval], ped_id: str, origin) -> Detection | None:
    """First detection while the pedestrian is still hidden from the camera; None is a miss."""
    o = Point2(*origin)
    for ev in evals:
        if ev.visibility.get(ped_id) is not Visibility.NLOS:
            continue
        m = ev.match_for(ped_id)
        if m is not None and m.hit:
            return Detection(ev.t, abs(m.truth.x - o.x))
    return None


def tta(t_idp: float | None, t_full: float | None) -> float | None:
    if t_idp is None or t_full is None:
        return None
    return t_full - t_idp


@dataclass(frozen=True)
class WindowScore:
    n_total: int
    n_hit: int
    errors: tuple[float, ...]

    @property
    def accuracy(self) -> float | None:
        return self.n_hit / self.n_total if self.n_total else None

    @property
    def ae(self) -> float | None:
        return sum(self.errors) / len(self.errors) if self.errors else None

    def __add__(self, other: "WindowScore") -> "WindowScore":
        return WindowScore(self.n_total + other.n_total, self.n_hit + other.n_hit, self.errors + other.errors)


def window_score(
    evals: Sequence[FrameEval], t_start: float, t_end: float, ped_id: str | None = None
) -> WindowScore:
    """Hit count and errors over frames with t in [t_start, t_end].

    Without a `ped_id` a frame counts as a hit when any of its matches does.
    """
    if t_start > t_end + TIME_SLACK:
        raise ValueError(f"window start {t_start} after end {t_end}")
    total = hits = 0
    errors = []
    for ev in evals:
        if not t_start - TIME_SLACK <= ev.t <= t_end + TIME_SLACK:
            continue
        total += 1
        if ped_id is None:
            good = [m for m in ev.matches if m.hit]
            m = min(good, key=lambda m: m.error) if good else None
        else:
            m = ev.match_for(ped_id)
            m = m if m is not None and m.hit else None
        if m is not None:
            hits += 1
            errors.append(m.error)
    return WindowScore(total, hits, tuple(errors))


def accuracy_and_ae(
    evals: Sequence[FrameEval], t_idp: float, t_full: float, ped_id: str | None = None
) -> tuple[float | None, float | None]:
    """(hit fraction, mean error over the hits) inside [t_idp, t_full]; None when undefined."""
    s = window_score(evals, t_idp, t_full, ped_id)
    return s.accuracy, s.ae


# -- reflector map -----------------------------------------------------------


@dataclass(frozen=True)
class VehicleError:
    name: str
    truth: Point2
    estimate: Point2 | None
    error: float | None

    @property
    def correct(self) -> bool:
        return self.error is not None and is_correct(self.error)


def spatial_report(boxes: Sequence[AlignedBox], vehicles: Mapping[str, AlignedBox]) -> list[VehicleError]:
    """Centre error per ground-truth vehicle; estimates are paired nearest-first."""
    pairs = sorted(
        (euclid_error(b.center, gt.center), bi, name)
        for bi, b in enumerate(boxes)
        for name, gt in vehicles.items()
    )
    used_b: set[int] = set()
    found: dict[str, tuple[Point2, float]] = {}
    for d, bi, name in pairs:
        if bi in used_b or name in found:
            continue
        used_b.add(bi)
        found[name] = (boxes[bi].center, d)
    out = []
    for name, gt in vehicles.items():
        est, err = found.get(name, (None, None))
        out.append(VehicleError(name, gt.center, est, err))
    return out


# -- scenario reports --------------------------------------------------------


@dataclass(frozen=True)
class PedestrianReport:
    ped_id: str
    target: bool  # starts hidden from the camera
    t_los: float | None
    t_full: float | None
    t_idp: float | None
    idp: float | None
    tta: float | None
    n_window: int
    n_hit: int
    accuracy: float | None
    ae: float | None


@dataclass(frozen=True)
class ScenarioReport:
    scenario: str
    pedestrians: tuple[PedestrianReport, ...]
    accuracy: float | None
    ae: float | None
    vehicles: tuple[VehicleError, ...] = ()
    n_frames: int = 0

    def __post_init__(self):
        if self.accuracy is not None and not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")

    @property
    def targets(self) -> list[PedestrianReport]:
        return [p for p in self.pedestrians if p.target]

    @property
    def idp(self) -> float | None:
        return _mean([p.idp for p in self.targets])

    @property
    def tta(self) -> float | None:
        return _mean([p.tta for p in self.targets])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["idp"], d["tta"] = self.idp, self.tta
        return d


def _mean(values: Iterable[float | None]) -> float | None:
    v = [x for x in values if x is not None]
    return sum(v) / len(v) if v else None


def pedestrian_report(evals: Sequence[FrameEval], ped_id: str, origin) -> tuple[PedestrianReport, WindowScore]:
    seen = [ev for ev in evals if ped_id in ev.visibility]
    target = bool(seen) and seen[0].visibility[ped_id] is Visibility.NLOS
    t_los = first_time(evals, ped_id, Visibility.PARTIAL)
    t_full = first_time(evals, ped_id, Visibility.FULL)
    det = idp(evals, ped_id, origin) if target else None
    score = WindowScore(0, 0, ())
    if target and t_full is not None:
        if det is not None:
            score = window_score(evals, det.t, t_full, ped_id)
        elif t_los is not None:
            # never found in time: the visible approach counts against it
            score = WindowScore(window_score(evals, t_los, t_full, ped_id).n_total, 0, ())
    rep = PedestrianReport(
        ped_id,
        target,
        t_los,
        t_full,
        det.t if det else None,
        det.idp if det else None,
        tta(det.t if det else None, t_full),
        score.n_total,
        score.n_hit,
        score.accuracy,
        score.ae,
    )
    return rep, score


def scenario_report(
    name: str,
    evals: Sequence[FrameEval],
    origin,
    boxes: Sequence[AlignedBox] = (),
    vehicles: Mapping[str, AlignedBox] | None = None,
) -> ScenarioReport:
    """Per-pedestrian timeline metrics with accuracy/AE pooled over the target windows."""
    ped_ids = sorted({pid for ev in evals for pid in ev.visibility})
    reps, total = [], WindowScore(0, 0, ())
    for pid in ped_ids:
        rep, score = pedestrian_report(evals, pid, origin)
        reps.append(rep)
        if rep.target:
            total = total + score
    veh = tuple(spatial_report(boxes, vehicles)) if vehicles else ()
    return ScenarioReport(name, tuple(reps), total.accuracy, total.ae, veh, len(evals))


# -- tables ------------------------------------------------------------------

TABLE2_COLUMNS = ("scenario", "tta_s", "idp_m", "accuracy", "ae_m")
TABLE1_COLUMNS = ("scenario", "vehicle", "radar_error_m", "reference_error_m", "diff_m")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def table2_rows(reports: Sequence[ScenarioReport]) -> list[dict]:
    return [
        {"scenario": r.scenario, "tta_s": r.tta, "idp_m": r.idp, "accuracy": r.accuracy, "ae_m": r.ae}
        for r in reports
    ]


def table1_rows(reports: Sequence[ScenarioReport], references: Sequence[ScenarioReport] | None = None) -> list[dict]:
    """Per-vehicle centre errors; `references` are the dense-sampling runs, matched by scenario name."""
    ref_by_name = {r.scenario: r for r in references or ()}
    rows = []
    for r in reports:
        ref = {v.name: v.error for v in ref_by_name[r.scenario].vehicles} if r.scenario in ref_by_name else {}
        for v in r.vehicles:
            re = ref.get(v.name)
            diff = v.error - re if v.error is not None and re is not None else None
            rows.append(
                {
                    "scenario": r.scenario,
                    "vehicle": v.name,
                    "radar_error_m": v.error,
                    "reference_error_m": re,
                    "diff_m": diff,
                }
            )
    return rows


def to_csv(rows: Sequence[Mapping], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


@dataclass(frozen=True)
class Aggregate:
    mean: float | None
    std: float | None
    n: int


def aggregate(values: Iterable[float | None]) -> Aggregate:
    v = [x for x in values if x is not None]
    if not v:
        return Aggregate(None, None, 0)
    return Aggregate(statistics.fmean(v), statistics.pstdev(v) if len(v) > 1 else 0.0, len(v))
