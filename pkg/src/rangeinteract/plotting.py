"""Tiny deterministic SVG line plots (axes, curves, shaded band)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["Series", "line_plot"]

COLORS = ("#1f4e79", "#b22222", "#2e7d32", "#6a1b9a", "#ef6c00")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    dashed: bool = False
    markers: bool = False


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    return f"{v:.4g}"


def _runs(x, y):
    """Split into runs of finite points."""
    ok = np.isfinite(x) & np.isfinite(y)
    run = []
    for k in range(len(x)):
        if ok[k]:
            run.append((x[k], y[k]))
        elif run:
            yield run
            run = []
    if run:
        yield run


def line_plot(series, band=None, title: str = "", xlabel: str = "", ylabel: str = "",
              width: int = 640, height: int = 400) -> str:
    """Render curves (and an optional ``(x, lo, hi)`` band) as SVG text."""
    series = list(series)
    xs = [np.asarray(s.x, dtype=float) for s in series]
    ys = [np.asarray(s.y, dtype=float) for s in series]
    if band is not None:
        bx, blo, bhi = (np.asarray(a, dtype=float) for a in band)
        xs.append(bx)
        ys.extend([blo, bhi])
    allx = np.concatenate([a[np.isfinite(a)] for a in xs] or [np.zeros(1)])
    ally = np.concatenate([a[np.isfinite(a)] for a in ys] or [np.zeros(1)])
    if allx.size == 0:
        allx = np.zeros(1)
    if ally.size == 0:
        ally = np.zeros(1)
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    left, right, top, bottom = 70, 20, 30, 50
    pw, ph = width - left - right, height - top - bottom

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (1 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>']
    if band is not None:
        ok = np.isfinite(bx) & np.isfinite(blo) & np.isfinite(bhi)
        if ok.any():
            upper = [f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(bx[ok], bhi[ok])]
            lower = [f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(bx[ok][::-1], blo[ok][::-1])]
            out.append(f'<polygon points="{" ".join(upper + lower)}" fill="#cccccc" stroke="none"/>')
    # axes and ticks
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in _ticks(x0, x1):
        X = _fmt(px(t))
        out.append(f'<line x1="{X}" y1="{top + ph}" x2="{X}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{X}" y="{top + ph + 16}" text-anchor="middle">{_label(t)}</text>')
    for t in _ticks(y0, y1):
        Y = _fmt(py(t))
        out.append(f'<line x1="{left - 4}" y1="{Y}" x2="{left}" y2="{Y}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{Y}" text-anchor="end" dominant-baseline="middle">{_label(t)}</text>')
    for k, (s, x, y) in enumerate(zip(series, xs, ys)):
        color = COLORS[k % len(COLORS)]
        dash = ' stroke-dasharray="5,3"' if s.dashed else ""
        for run in _runs(x, y):
            pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in run)
            if s.markers:
                out.extend(f'<circle cx="{_fmt(px(a))}" cy="{_fmt(py(b))}" r="1.5" fill="{color}"/>'
                           for a, b in run)
            else:
                out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        if s.label:
            ly = top + 14 + 14 * k
            out.append(f'<line x1="{left + pw - 120}" y1="{ly}" x2="{left + pw - 100}" y2="{ly}" '
                       f'stroke="{color}" stroke-width="1.5"{dash}/>')
            out.append(f'<text x="{left + pw - 95}" y="{ly + 4}">{escape(s.label)}</text>')
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
