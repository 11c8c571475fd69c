"""Tiny deterministic SVG line/scatter plots (linear or log-log axes)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 36, 52

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2")


@dataclass(frozen=True)
class Series:
    xs: Sequence[float]
    ys: Sequence[float]
    label: str = ""
    color: str = ""
    markers: bool = True
    line: bool = True
    dashed: bool = False
    width: float = 1.5


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        return [10.0**e for e in range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1)
                if lo <= 10.0**e <= hi] or [lo, hi]
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / 5)) if span > 0 else 1.0
    for m in (1, 2, 5, 10):
        if span / (step * m) <= 6:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def plot(series: Sequence[Series], title: str = "", xlabel: str = "", ylabel: str = "",
         log: bool = True) -> str:
    pts = [(x, y) for s in series for x, y in zip(s.xs, s.ys)]
    if log:
        pts = [(x, y) for x, y in pts if x > 0 and y > 0]
    if not pts:
        raise ValueError("nothing to plot")
    tx = (lambda v: math.log10(v)) if log else float
    xs = [tx(x) for x, _ in pts]
    ys = [tx(y) for _, y in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    padx = (x1 - x0) * 0.05 or 0.5
    pady = (y1 - y0) * 0.05 or 0.5
    x0, x1, y0, y1 = x0 - padx, x1 + padx, y0 - pady, y1 + pady
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def px(v):
        return MARGIN_L + (tx(v) - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN_T + ph - (tx(v) - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    inv = (lambda v: 10.0**v) if log else (lambda v: v)
    for t in _ticks(inv(x0), inv(x1), log):
        X = _fmt(px(t))
        out.append(f'<line x1="{X}" y1="{MARGIN_T + ph}" x2="{X}" y2="{MARGIN_T + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X}" y="{MARGIN_T + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(inv(y0), inv(y1), log):
        Y = _fmt(py(t))
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{Y}" x2="{MARGIN_L}" y2="{Y}" stroke="black"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{Y}" text-anchor="end" dominant-baseline="middle">{t:g}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2:g}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{MARGIN_L + pw / 2:g}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{MARGIN_T + ph / 2:g}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {MARGIN_T + ph / 2:g})">{escape(ylabel)}</text>')

    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        coords = [(px(x), py(y)) for x, y in zip(s.xs, s.ys) if not log or (x > 0 and y > 0)]
        if s.line and len(coords) > 1:
            path = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in coords)
            dash = ' stroke-dasharray="6 4"' if s.dashed else ""
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" '
                       f'stroke-width="{s.width:g}"{dash}/>')
        if s.markers:
            out += [f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="3" fill="{color}"/>' for a, b in coords]
        if s.label:
            ly = MARGIN_T + 16 + 16 * i
            out.append(f'<line x1="{WIDTH - MARGIN_R - 150}" y1="{ly - 4}" x2="{WIDTH - MARGIN_R - 130}" '
                       f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{WIDTH - MARGIN_R - 125}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
