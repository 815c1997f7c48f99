"""Tiny SVG emitters for solution and convergence figures.

Pure string assembly, no plotting dependency. Three figure kinds: a 1D
piecewise-constant staircase, a 2D grayscale cell map, and a log-log
error-vs-N chart with slope guides. Output is deterministic for fixed
input, so the files diff cleanly across runs.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 72, 24, 34, 52
_PLOT_W = _W - _ML - _MR
_PLOT_H = _H - _MT - _MB
_COLORS = ("#1f6fb4", "#c23b4b", "#3f7d20", "#8a5cb8")


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _open(title: str) -> list:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14">'
            f"{_esc(title)}</text>"
        )
    parts.append(
        f'<rect x="{_ML}" y="{_MT}" width="{_PLOT_W}" height="{_PLOT_H}" '
        'fill="none" stroke="#444"/>'
    )
    return parts


def _text(x, y, s, anchor="middle", extra=""):
    return f'<text x="{_fmt(x)}" y="{_fmt(y)}" text-anchor="{anchor}"{extra}>{_esc(s)}</text>'


def _xtick(px, label):
    return (
        f'<line x1="{_fmt(px)}" y1="{_MT + _PLOT_H}" x2="{_fmt(px)}" '
        f'y2="{_MT + _PLOT_H + 5}" stroke="#444"/>'
        + _text(px, _MT + _PLOT_H + 18, label)
    )


def _ytick(py, label):
    return (
        f'<line x1="{_ML - 5}" y1="{_fmt(py)}" x2="{_ML}" y2="{_fmt(py)}" stroke="#444"/>'
        + _text(_ML - 8, py + 4, label, anchor="end")
    )


def _axis_labels(xlabel, ylabel):
    parts = []
    if xlabel:
        parts.append(_text(_ML + _PLOT_W / 2, _H - 12, xlabel))
    if ylabel:
        x, y = 18, _MT + _PLOT_H / 2
        parts.append(
            f'<text x="{x}" y="{_fmt(y)}" text-anchor="middle" '
            f'transform="rotate(-90 {x} {_fmt(y)})">{_esc(ylabel)}</text>'
        )
    return parts


def _linear_ticks(lo, hi, count=5):
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def step_plot(edges, values, *, title="", xlabel="cell center", ylabel="density") -> str:
    """Staircase plot of a piecewise-constant function over cell edges.

    ``edges`` has one more entry than ``values``.
    """
    edges = np.asarray(edges, dtype=float)
    values = np.asarray(values, dtype=float)
    if edges.ndim != 1 or values.ndim != 1 or edges.size != values.size + 1:
        raise ValueError("need n+1 edges for n values")
    x_lo, x_hi = float(edges[0]), float(edges[-1])
    y_lo = min(0.0, float(values.min()))
    y_hi = float(values.max())
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    y_hi *= 1.08

    def sx(x):
        return _ML + (x - x_lo) / (x_hi - x_lo) * _PLOT_W

    def sy(y):
        return _MT + _PLOT_H - (y - y_lo) / (y_hi - y_lo) * _PLOT_H

    parts = _open(title)
    for t in _linear_ticks(x_lo, x_hi):
        parts.append(_xtick(sx(t), _fmt(t)))
    for t in _linear_ticks(y_lo, y_hi / 1.08, 4):
        parts.append(_ytick(sy(t), _fmt(t)))
    parts.extend(_axis_labels(xlabel, ylabel))

    coords = [f"{_fmt(sx(x_lo))},{_fmt(sy(values[0]))}"]
    for i, v in enumerate(values):
        py = _fmt(sy(v))
        coords.append(f"{_fmt(sx(edges[i]))},{py}")
        coords.append(f"{_fmt(sx(edges[i + 1]))},{py}")
    parts.append(
        f'<polyline points="{" ".join(coords[1:])}" fill="none" '
        f'stroke="{_COLORS[0]}" stroke-width="1.5"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts)


def _block_mean(a, target):
    n = a.shape[0]
    if n <= target:
        return a, np.arange(n + 1)
    block = math.ceil(n / target)
    starts = np.arange(0, n, block)
    sums = np.add.reduceat(a, starts, axis=0)
    counts = np.diff(np.append(starts, n))
    shape = (len(starts),) + (1,) * (a.ndim - 1)
    return sums / counts.reshape(shape), np.append(starts, n)


def heatmap(theta_edges, omega_edges, values, *, title="", max_cells=128) -> str:
    """Grayscale cell map of 2D masses; darker means more mass.

    Grids finer than ``max_cells`` per axis are block-averaged first so
    files stay small.
    """
    values = np.asarray(values, dtype=float)
    theta_edges = np.asarray(theta_edges, dtype=float)
    omega_edges = np.asarray(omega_edges, dtype=float)
    if values.shape != (theta_edges.size - 1, omega_edges.size - 1):
        raise ValueError("edge counts do not match the value grid")
    values, ti = _block_mean(values, max_cells)
    values, oi = _block_mean(values.T, max_cells)
    values = values.T
    t_edges = theta_edges[ti]
    o_edges = omega_edges[oi]

    vmax = float(values.max())
    if vmax <= 0:
        vmax = 1.0
    t_lo, t_hi = float(t_edges[0]), float(t_edges[-1])
    o_lo, o_hi = float(o_edges[0]), float(o_edges[-1])

    def sx(t):
        return _ML + (t - t_lo) / (t_hi - t_lo) * _PLOT_W

    def sy(o):
        return _MT + _PLOT_H - (o - o_lo) / (o_hi - o_lo) * _PLOT_H

    parts = _open(title)
    for i in range(values.shape[0]):
        x0 = sx(t_edges[i])
        w = sx(t_edges[i + 1]) - x0
        for j in range(values.shape[1]):
            v = values[i, j]
            if v <= 0:
                continue
            shade = int(round(255 * (1.0 - v / vmax)))
            y1 = sy(o_edges[j + 1])
            h = sy(o_edges[j]) - y1
            parts.append(
                f'<rect x="{_fmt(x0)}" y="{_fmt(y1)}" width="{_fmt(w)}" '
                f'height="{_fmt(h)}" fill="rgb({shade},{shade},{shade})"/>'
            )
    for t in _linear_ticks(t_lo, t_hi):
        parts.append(_xtick(sx(t), _fmt(t)))
    for t in _linear_ticks(o_lo, o_hi, 4):
        parts.append(_ytick(sy(t), _fmt(t)))
    parts.extend(_axis_labels("theta", "omega"))
    parts.append("</svg>")
    return "\n".join(parts)


def convergence_plot(
    ns: Sequence[int],
    series: Mapping[str, Sequence],
    *,
    guides: Sequence[float] = (0.5, 1.0),
    title="",
) -> str:
    """Log-log error-vs-N chart with dashed slope guides.

    ``series`` maps a label to per-N errors; entries that are None or
    nonpositive are skipped (undefined rows stay out of the picture).
    """
    points = {}
    for label, errs in series.items():
        pts = [
            (n, e)
            for n, e in zip(ns, errs)
            if e is not None and e > 0 and math.isfinite(e)
        ]
        if pts:
            points[label] = pts
    if not points:
        raise ValueError("nothing to plot: every error is undefined")

    all_n = [n for pts in points.values() for n, _ in pts]
    all_e = [e for pts in points.values() for _, e in pts]
    lx_lo, lx_hi = math.log10(min(all_n)) - 0.05, math.log10(max(all_n)) + 0.05
    ly_lo, ly_hi = math.log10(min(all_e)) - 0.15, math.log10(max(all_e)) + 0.15

    def sx(n):
        return _ML + (math.log10(n) - lx_lo) / (lx_hi - lx_lo) * _PLOT_W

    def sy(e):
        return _MT + _PLOT_H - (math.log10(e) - ly_lo) / (ly_hi - ly_lo) * _PLOT_H

    parts = _open(title)
    for n in sorted(set(all_n)):
        parts.append(_xtick(sx(n), str(n)))
    decade = math.floor(ly_lo)
    while decade <= ly_hi:
        if ly_lo <= decade <= ly_hi:
            parts.append(_ytick(sy(10.0**decade), f"1e{decade:d}"))
        decade += 1
    parts.extend(_axis_labels("N", "error"))

    n0, n1 = min(all_n), max(all_n)
    anchor = max(all_e)
    for slope in guides:
        e0 = anchor * 1.6
        e1 = e0 * (n0 / n1) ** slope
        parts.append(
            f'<line x1="{_fmt(sx(n0))}" y1="{_fmt(sy(e0))}" x2="{_fmt(sx(n1))}" '
            f'y2="{_fmt(sy(e1))}" stroke="#999" stroke-dasharray="5,4"/>'
        )
        parts.append(
            _text(sx(n1) - 4, sy(e1) - 5, f"slope {_fmt(slope)}", anchor="end",
                  extra=' fill="#777"')
        )

    for idx, (label, pts) in enumerate(sorted(points.items())):
        color = _COLORS[idx % len(_COLORS)]
        coords = " ".join(f"{_fmt(sx(n))},{_fmt(sy(e))}" for n, e in pts)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            'stroke-width="1.5"/>'
        )
        for n, e in pts:
            parts.append(
                f'<circle cx="{_fmt(sx(n))}" cy="{_fmt(sy(e))}" r="3" fill="{color}"/>'
            )
        parts.append(
            _text(
                _ML + _PLOT_W - 8,
                _MT + 16 + 16 * idx,
                label,
                anchor="end",
                extra=f' fill="{color}"',
            )
        )
    parts.append("</svg>")
    return "\n".join(parts)
