"""Self-contained SVG rendering of error curves and formation snapshots."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .sim import TrajectoryLog

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd",
)
MAX_POINTS = 800


def _f(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / count
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step) * step
    out = []
    k = 0
    while first + k * step <= hi + 1e-9 * span:
        out.append(round(first + k * step, 10))
        k += 1
    return out


class _Panel:
    """Affine map from data coordinates to a pixel box (y axis up)."""

    def __init__(self, x0, y0, w, h, xlim, ylim):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.xlim, self.ylim = xlim, ylim

    def px(self, x):
        lo, hi = self.xlim
        return self.x0 + (x - lo) / (hi - lo) * self.w

    def py(self, y):
        lo, hi = self.ylim
        return self.y0 + self.h - (y - lo) / (hi - lo) * self.h

    def polyline(self, xs, ys, color, width=1.0, extra=""):
        pts = " ".join(f"{_f(self.px(a))},{_f(self.py(b))}" for a, b in zip(xs, ys))
        return (f'<polyline points="{pts}" fill="none" stroke="{color}" '
                f'stroke-width="{width}"{extra}/>')

    def axes(self, xlabel, ylabel, title):
        out = [f'<rect x="{_f(self.x0)}" y="{_f(self.y0)}" width="{_f(self.w)}" height="{_f(self.h)}" '
               f'fill="none" stroke="#000"/>']
        for tx in _ticks(*self.xlim):
            x = self.px(tx)
            out.append(f'<line x1="{_f(x)}" y1="{_f(self.y0 + self.h)}" x2="{_f(x)}" '
                       f'y2="{_f(self.y0 + self.h + 4)}" stroke="#000"/>')
            out.append(f'<text x="{_f(x)}" y="{_f(self.y0 + self.h + 16)}" font-size="10" '
                       f'text-anchor="middle">{tx:g}</text>')
        for ty in _ticks(*self.ylim):
            y = self.py(ty)
            out.append(f'<line x1="{_f(self.x0 - 4)}" y1="{_f(y)}" x2="{_f(self.x0)}" y2="{_f(y)}" stroke="#000"/>')
            out.append(f'<text x="{_f(self.x0 - 6)}" y="{_f(y + 3)}" font-size="10" '
                       f'text-anchor="end">{ty:g}</text>')
        out.append(f'<text x="{_f(self.x0 + self.w / 2)}" y="{_f(self.y0 - 8)}" font-size="13" '
                   f'text-anchor="middle">{escape(title)}</text>')
        out.append(f'<text x="{_f(self.x0 + self.w / 2)}" y="{_f(self.y0 + self.h + 32)}" font-size="11" '
                   f'text-anchor="middle">{escape(xlabel)}</text>')
        cy = self.y0 + self.h / 2
        out.append(f'<text x="{_f(self.x0 - 42)}" y="{_f(cy)}" font-size="11" text-anchor="middle" '
                   f'transform="rotate(-90 {_f(self.x0 - 42)} {_f(cy)})">{escape(ylabel)}</text>')
        return out


def _document(width, height, body):
    head = (f'<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif">\n'
            f'<rect width="100%" height="100%" fill="#fff"/>\n')
    return head + "\n".join(body) + "\n</svg>\n"


def _limits(values, pad=0.05):
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    span = hi - lo
    return lo - pad * span, hi + pad * span


def error_svg(log: TrajectoryLog, title: str = "") -> str:
    """Per-agent position and velocity formation errors over time."""
    stride = max(1, math.ceil(len(log.t) / MAX_POINTS))
    idx = np.arange(0, len(log.t), stride)
    if idx[-1] != len(log.t) - 1:
        idx = np.append(idx, len(log.t) - 1)
    t = log.t[idx]
    pos = np.linalg.norm(log.z_x[idx], axis=2)
    vel = np.linalg.norm(log.z_v[idx], axis=2)
    width, height = 760, 620
    body = []
    xlim = (float(log.t[0]), float(log.t[-1]) if log.t[-1] > log.t[0] else float(log.t[0]) + 1.0)
    for k, (data, label) in enumerate(((pos, "|x_i - xbar - p_i|"), (vel, "|v_i - vbar|"))):
        panel = _Panel(80, 50 + k * 290, 640, 220, xlim, (0.0, _limits(data)[1]))
        name = "position" if k == 0 else "velocity"
        body += panel.axes("t [s]", label, f"{title} {name} formation error".strip())
        for i in range(data.shape[1]):
            body.append(panel.polyline(t, data[:, i], PALETTE[i % len(PALETTE)], 1.0))
    return _document(width, height, body)


def formation_svg(log: TrajectoryLog, offsets: np.ndarray, title: str = "") -> str:
    """Final agent positions with the desired hexagon around the leader, plus paths."""
    offsets = np.asarray(offsets, dtype=float)
    centre = log.leader_x[-1]
    final = log.x[-1]
    stride = max(1, math.ceil(len(log.t) / MAX_POINTS))
    paths = log.x[::stride]
    radius = float(np.max(np.linalg.norm(offsets, axis=1))) if len(offsets) else 1.0
    k = np.arange(7)
    hexagon = centre + radius * np.stack([np.cos(k * np.pi / 3), np.sin(k * np.pi / 3)], axis=1)
    allx = np.concatenate([paths[..., 0].ravel(), hexagon[:, 0], log.leader_x[:, 0]])
    ally = np.concatenate([paths[..., 1].ravel(), hexagon[:, 1], log.leader_x[:, 1]])
    xlim, ylim = _limits(allx), _limits(ally)
    # equal aspect ratio
    span = max(xlim[1] - xlim[0], ylim[1] - ylim[0])
    cx, cy = sum(xlim) / 2, sum(ylim) / 2
    xlim, ylim = (cx - span / 2, cx + span / 2), (cy - span / 2, cy + span / 2)
    panel = _Panel(80, 50, 560, 560, xlim, ylim)
    body = panel.axes("x", "y", title or f"formation at t = {log.t[-1]:g} s")
    for i in range(paths.shape[1]):
        body.append(panel.polyline(paths[:, i, 0], paths[:, i, 1], PALETTE[i % len(PALETTE)], 0.6,
                                   ' stroke-opacity="0.35"'))
    body.append(panel.polyline(log.leader_x[::stride, 0], log.leader_x[::stride, 1], "#000", 0.8,
                               ' stroke-dasharray="4 3"'))
    body.append(panel.polyline(hexagon[:, 0], hexagon[:, 1], "#888", 1.2))
    for i, (px, py) in enumerate(final):
        body.append(f'<circle cx="{_f(panel.px(px))}" cy="{_f(panel.py(py))}" r="4.5" '
                    f'fill="{PALETTE[i % len(PALETTE)]}" stroke="#000" stroke-width="0.5"/>')
        body.append(f'<text x="{_f(panel.px(px) + 6)}" y="{_f(panel.py(py) - 6)}" font-size="9">{i + 1}</text>')
    lx, ly = panel.px(centre[0]), panel.py(centre[1])
    body.append(f'<rect x="{_f(lx - 4)}" y="{_f(ly - 4)}" width="8" height="8" fill="#000"/>')
    return _document(720, 680, body)
