"""Minimal native SVG line and scatter charts (no plotting dependency)."""
from __future__ import annotations

import math

import numpy as np

__all__ = ["line_chart", "scatter_chart"]

_W, _H, _PAD = 480, 320, 48
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _scale(lo: float, hi: float, a: float, b: float):
    if not math.isfinite(lo) or not math.isfinite(hi) or hi <= lo:
        lo, hi = (lo - 0.5, lo + 0.5) if math.isfinite(lo) else (0.0, 1.0)
    return lambda v: a + (np.asarray(v, dtype=float) - lo) * (b - a) / (hi - lo)


def _frame(title: str, xlabel: str, ylabel: str, xr, yr) -> list[str]:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" font-family="sans-serif" font-size="11">',
        f'<rect x="{_PAD}" y="{_PAD // 2}" width="{_W - 1.5 * _PAD:.0f}" height="{_H - 1.5 * _PAD:.0f}" fill="none" stroke="#444"/>',
        f'<text x="{_W / 2:.0f}" y="14" text-anchor="middle">{title}</text>',
        f'<text x="{_W / 2:.0f}" y="{_H - 6}" text-anchor="middle">{xlabel}</text>',
        f'<text x="12" y="{_H / 2:.0f}" transform="rotate(-90 12 {_H / 2:.0f})" text-anchor="middle">{ylabel}</text>',
        f'<text x="{_PAD}" y="{_H - _PAD + 14}" text-anchor="middle">{xr[0]:.3g}</text>',
        f'<text x="{_W - _PAD // 2}" y="{_H - _PAD + 14}" text-anchor="middle">{xr[1]:.3g}</text>',
        f'<text x="{_PAD - 4}" y="{_H - _PAD}" text-anchor="end">{yr[0]:.3g}</text>',
        f'<text x="{_PAD - 4}" y="{_PAD // 2 + 10}" text-anchor="end">{yr[1]:.3g}</text>',
    ]
    return out


def _ranges(xs, ys):
    xs = np.concatenate([np.ravel(x) for x in xs]) if xs else np.zeros(1)
    ys = np.concatenate([np.ravel(y) for y in ys]) if ys else np.zeros(1)
    xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
    xr = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    yr = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    return xr, yr


def line_chart(path, series: dict, title: str = "", xlabel: str = "x", ylabel: str = "y") -> None:
    """Write polylines ``{label: (x, y)}`` to ``path``."""
    xr, yr = _ranges([s[0] for s in series.values()], [s[1] for s in series.values()])
    sx = _scale(*xr, _PAD, _W - _PAD // 2)
    sy = _scale(*yr, _H - _PAD, _PAD // 2)
    out = _frame(title, xlabel, ylabel, xr, yr)
    for i, (label, (x, y)) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(sx(x[ok]), sy(y[ok])))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{_W - _PAD}" y="{_PAD // 2 + 14 * (i + 1)}" fill="{color}" text-anchor="end">{label}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def scatter_chart(path, points: np.ndarray, title: str = "", xlabel: str = "x0", ylabel: str = "x1", marks=None) -> None:
    """Write a 2D scatter of ``points[:, :2]``; optional ``marks`` are drawn as larger red dots."""
    points = np.asarray(points, dtype=float)
    extra = [] if marks is None else [np.asarray(marks, dtype=float)]
    xr, yr = _ranges([points[:, 0], *[m[:, 0] for m in extra]], [points[:, 1], *[m[:, 1] for m in extra]])
    sx = _scale(*xr, _PAD, _W - _PAD // 2)
    sy = _scale(*yr, _H - _PAD, _PAD // 2)
    out = _frame(title, xlabel, ylabel, xr, yr)
    for a, b in zip(sx(points[:, 0]), sy(points[:, 1])):
        out.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="1.5" fill="#1f77b4" fill-opacity="0.5"/>')
    for m in extra:
        for a, b in zip(sx(m[:, 0]), sy(m[:, 1])):
            out.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="4" fill="#d62728"/>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
