"""Dependency-free SVG charts for training curves and trajectories."""

from __future__ import annotations

import csv
import io
from xml.sax.saxutils import escape

import numpy as np

from .hierarchy import LOG_HEADER

PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]


class LogFormatError(ValueError):
    pass


def moving_average(values, window: int = 100) -> np.ndarray:
    """Trailing mean over up to ``window`` samples (shorter at the start)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    v = np.asarray(values, dtype=np.float64)
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(1, len(v) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def read_log(text: str) -> dict[str, list]:
    """Parse a training log into columns; empty cells become None."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise LogFormatError("log is empty")
    if rows[0] != LOG_HEADER:
        raise LogFormatError(f"unexpected log header {rows[0]}")
    if len(rows) == 1:
        raise LogFormatError("log has no episodes")
    cols = {k: [] for k in LOG_HEADER}
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(LOG_HEADER):
            raise LogFormatError(f"line {n}: expected {len(LOG_HEADER)} fields, got {len(row)}")
        for k, cell in zip(LOG_HEADER, row):
            if k == "outcome":
                cols[k].append(cell)
                continue
            try:
                cols[k].append(None if cell == "" else float(cell))
            except ValueError:
                raise LogFormatError(f"line {n}: {k} is not a number: {cell!r}") from None
    return cols


class Frame:
    """Maps data coordinates onto an SVG viewport."""

    def __init__(self, xs, ys, width=640, height=360, margin=48):
        self.w, self.h, self.m = width, height, margin
        self.x0, self.x1 = float(min(xs)), float(max(xs))
        self.y0, self.y1 = float(min(ys)), float(max(ys))
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 1.0, self.x1 + 1.0
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 1.0, self.y1 + 1.0

    def px(self, x):
        return self.m + (x - self.x0) / (self.x1 - self.x0) * (self.w - 2 * self.m)

    def py(self, y):
        return self.h - self.m - (y - self.y0) / (self.y1 - self.y0) * (self.h - 2 * self.m)


def _polyline(frame, xs, ys, color, width=1.0, opacity=1.0, label="") -> str:
    pts = " ".join(f"{frame.px(x):.2f},{frame.py(y):.2f}" for x, y in zip(xs, ys))
    return (f'<polyline data-series="{escape(label)}" fill="none" stroke="{color}" stroke-width="{width}" '
            f'stroke-opacity="{opacity}" points="{pts}"/>')


def _axes(frame, title, xlabel, ylabel) -> list[str]:
    f = frame
    out = [
        f'<rect x="0" y="0" width="{f.w}" height="{f.h}" fill="white"/>',
        f'<line x1="{f.m}" y1="{f.h - f.m}" x2="{f.w - f.m}" y2="{f.h - f.m}" stroke="black"/>',
        f'<line x1="{f.m}" y1="{f.m}" x2="{f.m}" y2="{f.h - f.m}" stroke="black"/>',
        f'<text x="{f.w / 2}" y="{f.m / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{f.w / 2}" y="{f.h - 8}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>',
        f'<text x="12" y="{f.h / 2}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 12 {f.h / 2})">{escape(ylabel)}</text>',
    ]
    for y in (f.y0, f.y1):
        out.append(f'<text x="{f.m - 4}" y="{f.py(y) + 4:.2f}" text-anchor="end" font-size="10">{y:.3g}</text>')
    for x in (f.x0, f.x1):
        out.append(f'<text x="{f.px(x):.2f}" y="{f.h - f.m + 14}" text-anchor="middle" font-size="10">{x:.3g}</text>')
    return out


def _svg(frame, body) -> str:
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{frame.w}" height="{frame.h}" '
            f'viewBox="0 0 {frame.w} {frame.h}">\n' + "\n".join(body) + "\n</svg>\n")


def line_chart(series: dict, title: str, xlabel: str = "episode", ylabel: str = "",
               window: int | None = 100) -> str:
    """One faint raw polyline per series plus, when ``window`` is set, its moving average."""
    series = {k: (np.asarray(x, float), np.asarray(y, float)) for k, (x, y) in series.items() if len(x)}
    if not series:
        raise ValueError("nothing to plot")
    all_x = np.concatenate([x for x, _ in series.values()])
    all_y = np.concatenate([y for _, y in series.values()])
    frame = Frame(all_x, all_y)
    body = _axes(frame, title, xlabel, ylabel)
    for i, (name, (x, y)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        body.append(_polyline(frame, x, y, color, 1.0, 0.35 if window else 1.0, name))
        if window:
            body.append(_polyline(frame, x, moving_average(y, window), color, 2.0, 1.0, f"{name} (avg {window})"))
        body.append(f'<text x="{frame.w - frame.m}" y="{frame.m + 14 * (i + 1)}" text-anchor="end" '
                    f'font-size="11" fill="{color}">{escape(name)}</text>')
    return _svg(frame, body)


def _column(cols, key):
    pairs = [(e, v) for e, v in zip(cols["episode"], cols[key]) if v is not None]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def reward_chart(cols: dict, window: int = 100) -> str:
    series = {k: _column(cols, k) for k in ("ep_reward_low", "ep_reward_high")}
    return line_chart(series, "Episode reward", ylabel="reward", window=window)


def loss_chart(cols: dict, window: int = 100) -> str:
    series = {k: _column(cols, k) for k in ("loss_q", "loss_c1", "loss_c2", "loss_actor")}
    if not any(len(x) for x, _ in series.values()):
        raise LogFormatError("log has no loss values")
    return line_chart(series, "Training loss", ylabel="loss", window=window)


def trajectory_chart(world, trajectories: list, title: str = "Trajectories") -> str:
    """World obstacles with one polyline per trajectory (arrays of x, y)."""
    xmin, ymin, xmax, ymax = world.bounds
    frame = Frame([xmin, xmax], [ymin, ymax], width=480, height=480, margin=24)
    body = [f'<rect x="0" y="0" width="{frame.w}" height="{frame.h}" fill="white"/>',
            f'<text x="{frame.w / 2}" y="16" text-anchor="middle" font-size="13">{escape(title)}</text>',
            f'<rect x="{frame.px(xmin):.2f}" y="{frame.py(ymax):.2f}" width="{frame.px(xmax) - frame.px(xmin):.2f}" '
            f'height="{frame.py(ymin) - frame.py(ymax):.2f}" fill="none" stroke="black"/>']
    sx = (frame.px(xmax) - frame.px(xmin)) / (xmax - xmin)
    for c in world.circles:
        body.append(f'<circle cx="{frame.px(c[0]):.2f}" cy="{frame.py(c[1]):.2f}" r="{c[2] * sx:.2f}" fill="#999"/>')
    for r in world.rects:
        body.append(f'<rect x="{frame.px(r[0]):.2f}" y="{frame.py(r[3]):.2f}" width="{(r[2] - r[0]) * sx:.2f}" '
                    f'height="{(r[3] - r[1]) * sx:.2f}" fill="#999"/>')
    for i, traj in enumerate(trajectories):
        t = np.asarray(traj, float)
        body.append(_polyline(frame, t[:, 0], t[:, 1], PALETTE[i % len(PALETTE)], 1.5, 0.9, f"episode {i}"))
    return _svg(frame, body)
