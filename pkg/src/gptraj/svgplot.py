"""Deterministic SVG rendering of simulation runs. No plotting dependencies."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .runtime import RunRecord
from .states import MarkovState

_STYLE = {
    "background": "#f8f8f6",
    "border": "#c8c8c2",
    "obstacle": "#5b5b56",
    "plan": "#3572b0",
    "truth": "#1a1a1a",
    "estimate": "#2a9d4e",
    "measurement": "#e07b39",
    "start": "#3572b0",
    "goal": "#c03a2b",
}


def _fmt(value: float) -> str:
    text = f"{value:.3f}"
    return "0.000" if text == "-0.000" else text


def _polyline(points: Sequence[tuple[float, float]], color: str, width: float,
              dash: str | None = None) -> str:
    coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'<polyline points="{coords}" fill="none" stroke="{color}" '
        f'stroke-width="{_fmt(width)}"{dash_attr} stroke-linejoin="round" '
        'stroke-linecap="round"/>'
    )


def _circle(x: float, y: float, r: float, fill: str, opacity: float = 1.0) -> str:
    extra = "" if opacity >= 1.0 else f' fill-opacity="{_fmt(opacity)}"'
    return f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}" fill="{fill}"{extra}/>'


def render_run_svg(record: RunRecord, width: int = 900) -> str:
    """Draw one run: world, obstacles, plan, truth, estimate, measurements.

    The output is a standalone SVG string; rendering the same record twice
    yields identical text.  World y points up, so the vertical axis is
    flipped into SVG screen coordinates.
    """
    extent = np.asarray(record.world.extent, dtype=float)
    pad = 0.05 * float(np.max(extent))
    scale = width / (extent[0] + 2 * pad)
    height = int(round((extent[1] + 2 * pad) * scale))

    def sx(x: float) -> float:
        return (x + extent[0] / 2 + pad) * scale

    def sy(y: float) -> float:
        return (extent[1] / 2 + pad - y) * scale

    def path_points(states: Sequence[MarkovState]) -> list[tuple[float, float]]:
        return [(sx(s.config.base.x), sy(s.config.base.y)) for s in states]

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" '
        f'fill="{_STYLE["background"]}"/>',
        f'<rect x="{_fmt(sx(-extent[0] / 2))}" y="{_fmt(sy(extent[1] / 2))}" '
        f'width="{_fmt(extent[0] * scale)}" height="{_fmt(extent[1] * scale)}" '
        f'fill="none" stroke="{_STYLE["border"]}" stroke-width="1"/>',
    ]
    for box in record.world.obstacles:
        cx, cy = float(box.center[0]), float(box.center[1])
        w, h = float(box.size[0]), float(box.size[1])
        parts.append(
            f'<rect x="{_fmt(sx(cx - w / 2))}" y="{_fmt(sy(cy + h / 2))}" '
            f'width="{_fmt(w * scale)}" height="{_fmt(h * scale)}" '
            f'fill="{_STYLE["obstacle"]}"/>'
        )
    if record.plans:
        parts.append(
            _polyline(path_points(record.plans[0]), _STYLE["plan"], 1.5, dash="6,4")
        )
    for cfg in record.measurements or []:
        if cfg is not None:
            parts.append(
                _circle(sx(cfg.base.x), sy(cfg.base.y), 3.0,
                        _STYLE["measurement"], opacity=0.8)
            )
    if record.ground_truth:
        parts.append(_polyline(path_points(record.ground_truth), _STYLE["truth"], 2.0))
    if record.estimated:
        parts.append(
            _polyline(path_points(record.estimated), _STYLE["estimate"], 1.5)
        )
    if record.ground_truth:
        first = record.ground_truth[0].config
        parts.append(_circle(sx(first.base.x), sy(first.base.y), 5.0, _STYLE["start"]))
    goal_xy = _goal_point(record)
    if goal_xy is not None:
        gx, gy = sx(goal_xy[0]), sy(goal_xy[1])
        parts.append(
            f'<circle cx="{_fmt(gx)}" cy="{_fmt(gy)}" r="5.0" fill="none" '
            f'stroke="{_STYLE["goal"]}" stroke-width="2"/>'
        )
    label = f"mode={record.mode} success={str(record.success).lower()}"
    parts.append(
        f'<text x="10" y="{height - 10}" font-family="monospace" '
        f'font-size="14" fill="#333">{label}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts)


def _goal_point(record: RunRecord) -> tuple[float, float] | None:
    if record.plans:
        goal = record.plans[0][-1].config
        return float(goal.base.x), float(goal.base.y)
    if record.ground_truth:
        last = record.ground_truth[-1].config
        return float(last.base.x), float(last.base.y)
    return None


def save_run_svg(record: RunRecord, path: str | Path, width: int = 900) -> Path:
    out = Path(path)
    out.write_text(render_run_svg(record, width=width))
    return out
