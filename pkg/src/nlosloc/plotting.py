"""Small deterministic SVG writers for run overlays and metric timelines."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

from .core import AlignedBox, Point2
from .evaluation import FrameEval

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _f(v: float) -> str:
    return f"{v:.3f}"


@dataclass
class _Canvas:
    """Maps ego (x forward, y left) to SVG with x up the page and y to the left."""

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    scale: float = 40.0
    margin: float = 30.0

    @property
    def width(self) -> float:
        return (self.y_range[1] - self.y_range[0]) * self.scale + 2 * self.margin

    @property
    def height(self) -> float:
        return (self.x_range[1] - self.x_range[0]) * self.scale + 2 * self.margin

    def map(self, p) -> tuple[float, float]:
        x, y = p
        return (
            self.margin + (self.y_range[1] - y) * self.scale,
            self.margin + (self.x_range[1] - x) * self.scale,
        )


def _svg(width: float, height: float, body: list[str], title: str) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
        f'viewBox="0 0 {_f(width)} {_f(height)}">\n<title>{escape(title)}</title>\n'
        f'<rect width="100%" height="100%" fill="white"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def _rect(c: _Canvas, b: AlignedBox, stroke: str, fill: str = "none", dash: str | None = None) -> str:
    x0, y0 = c.map((b.x_max, b.y_max))
    x1, y1 = c.map((b.x_min, b.y_min))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'<rect x="{_f(x0)}" y="{_f(y0)}" width="{_f(x1 - x0)}" height="{_f(y1 - y0)}" '
        f'fill="{fill}" stroke="{stroke}" stroke-width="1.5"{extra}/>'
    )


def overlay_svg(
    title: str,
    truth_vehicles: Sequence[AlignedBox],
    estimated_vehicles: Sequence[AlignedBox],
    tracks: dict[str, Sequence[Point2]],
    estimates: Sequence[Point2],
    origin: Point2,
) -> str:
    """Bird's-eye view: true and inferred vehicles, pedestrian paths and all position estimates."""
    xs = [origin.x] + [v for b in truth_vehicles for v in (b.x_min, b.x_max)]
    ys = [origin.y] + [v for b in truth_vehicles for v in (b.y_min, b.y_max)]
    for pts in tracks.values():
        xs += [p.x for p in pts]
        ys += [p.y for p in pts]
    xs += [p.x for p in estimates]
    ys += [p.y for p in estimates]
    c = _Canvas((min(xs) - 1.0, max(xs) + 1.0), (min(ys) - 1.0, max(ys) + 1.0))
    body = []
    for b in truth_vehicles:
        body.append(_rect(c, b, "#444444", "#dddddd"))
    for b in estimated_vehicles:
        body.append(_rect(c, b, "#1f77b4", dash="4 2"))
    for i, (pid, pts) in enumerate(sorted(tracks.items())):
        if len(pts) < 2:
            continue
        path = " ".join(f"{_f(u)},{_f(v)}" for u, v in (c.map(p) for p in pts))
        color = PALETTE[(i + 2) % len(PALETTE)]
        body.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
        u, v = c.map(pts[0])
        body.append(f'<text x="{_f(u + 4)}" y="{_f(v)}" font-size="11" fill="{color}">{escape(pid)}</text>')
    for p in estimates:
        u, v = c.map(p)
        body.append(f'<circle cx="{_f(u)}" cy="{_f(v)}" r="2.5" fill="#d62728"/>')
    u, v = c.map(origin)
    body.append(f'<polygon points="{_f(u)},{_f(v - 8)} {_f(u - 6)},{_f(v + 6)} {_f(u + 6)},{_f(v + 6)}" fill="black"/>')
    return _svg(c.width, c.height, body, title)


def timeline_svg(title: str, evals: Sequence[FrameEval], width: float = 640.0, height: float = 240.0) -> str:
    """Per-pedestrian localisation error over time; hollow markers are frames whose IoU misses."""
    m = 40.0
    t0 = min((e.t for e in evals), default=0.0)
    t1 = max((e.t for e in evals), default=1.0)
    errs = [mt.error for e in evals for mt in e.matches]
    top = max(errs + [0.5])
    sx = (width - 2 * m) / max(t1 - t0, 1e-9)
    sy = (height - 2 * m) / top

    def xy(t: float, err: float) -> tuple[float, float]:
        return m + (t - t0) * sx, height - m - err * sy

    body = [
        f'<line x1="{_f(m)}" y1="{_f(height - m)}" x2="{_f(width - m)}" y2="{_f(height - m)}" stroke="black"/>',
        f'<line x1="{_f(m)}" y1="{_f(m)}" x2="{_f(m)}" y2="{_f(height - m)}" stroke="black"/>',
        f'<text x="{_f(width / 2)}" y="{_f(height - 8)}" font-size="11" text-anchor="middle">t [s]</text>',
        f'<text x="8" y="{_f(m - 10)}" font-size="11">error [m] (max {top:.2f})</text>',
    ]
    ped_ids = sorted({pid for e in evals for pid in e.visibility})
    for i, pid in enumerate(ped_ids):
        color = PALETTE[i % len(PALETTE)]
        for e in evals:
            mt = e.match_for(pid)
            if mt is None:
                continue
            u, v = xy(e.t, mt.error)
            fill = color if mt.hit else "none"
            body.append(f'<circle cx="{_f(u)}" cy="{_f(v)}" r="3" fill="{fill}" stroke="{color}"/>')
        body.append(f'<text x="{_f(width - m - 60)}" y="{_f(m + 14 * i)}" font-size="11" fill="{color}">{escape(pid)}</text>')
    return _svg(width, height, body, title)


def bars_svg(title: str, labels: Sequence[str], values: Sequence[float | None], width: float = 480.0, height: float = 240.0) -> str:
    """Vertical bars for values in [0, 1] (missing values drawn as empty slots)."""
    m = 40.0
    n = max(len(labels), 1)
    slot = (width - 2 * m) / n
    body = [f'<line x1="{_f(m)}" y1="{_f(height - m)}" x2="{_f(width - m)}" y2="{_f(height - m)}" stroke="black"/>']
    for i, (lab, val) in enumerate(zip(labels, values)):
        x = m + i * slot + slot * 0.15
        if val is not None:
            h = max(0.0, min(1.0, val)) * (height - 2 * m)
            body.append(
                f'<rect x="{_f(x)}" y="{_f(height - m - h)}" width="{_f(slot * 0.7)}" height="{_f(h)}" fill="{PALETTE[0]}"/>'
            )
            body.append(f'<text x="{_f(x + slot * 0.35)}" y="{_f(height - m - h - 4)}" font-size="11" text-anchor="middle">{val:.3f}</text>')
        body.append(f'<text x="{_f(x + slot * 0.35)}" y="{_f(height - m + 14)}" font-size="11" text-anchor="middle">{escape(lab)}</text>')
    return _svg(width, height, body, title)
