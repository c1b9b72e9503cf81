"""Accuracy-versus-keep-ratio line charts as standalone SVG documents.

One polyline per strategy with circle markers at the data points, linear
axes, and a labeled legend. Output is a pure function of the input rows:
coordinates print with two fixed decimals and strategies render in sorted
order, so equal inputs produce byte-identical documents.
"""
from __future__ import annotations

from typing import Sequence

from .sweep import ResultRow

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64, 24, 40, 52
_PLOT_W, _PLOT_H = 520, 300


def emit_svg_lines(rows: Sequence[ResultRow], title: str = "Accuracy vs keep ratio") -> str:
    if not rows:
        raise ValueError("no rows to plot")
    strategies = sorted({r.strategy for r in rows})
    # mean acc1 per (strategy, ratio), averaged over seeds
    points: dict[str, list[tuple[float, float]]] = {}
    for name in strategies:
        cells: dict[float, list[float]] = {}
        for r in rows:
            if r.strategy == name:
                cells.setdefault(r.keep_ratio, []).append(r.acc1)
        points[name] = sorted((ratio, sum(v) / len(v)) for ratio, v in cells.items())

    xs = [x for pts in points.values() for x, _ in pts]
    ys = [y for pts in points.values() for _, y in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.1, x_hi + 0.1
    pad = max(0.02, (y_hi - y_lo) * 0.1)
    y_lo, y_hi = max(0.0, y_lo - pad), min(1.0, y_hi + pad)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.05, y_hi + 0.05

    width = _MARGIN_L + _PLOT_W + _MARGIN_R
    height = _MARGIN_T + _PLOT_H + _MARGIN_B

    def sx(x: float) -> str:
        return f"{_MARGIN_L + (x - x_lo) / (x_hi - x_lo) * _PLOT_W:.2f}"

    def sy(y: float) -> str:
        return f"{_MARGIN_T + _PLOT_H - (y - y_lo) / (y_hi - y_lo) * _PLOT_H:.2f}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'font-family="sans-serif">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{width / 2:.2f}" y="22" text-anchor="middle" font-size="15" '
        f'fill="#222">{title}</text>',
    ]
    # grid and axis labels, five divisions each way
    for i in range(6):
        gx = _MARGIN_L + _PLOT_W * i / 5
        gy = _MARGIN_T + _PLOT_H - _PLOT_H * i / 5
        xv = x_lo + (x_hi - x_lo) * i / 5
        yv = y_lo + (y_hi - y_lo) * i / 5
        out.append(f'<line x1="{gx:.2f}" y1="{_MARGIN_T}" x2="{gx:.2f}" '
                   f'y2="{_MARGIN_T + _PLOT_H}" stroke="#e5e5e5" stroke-width="1"/>')
        out.append(f'<line x1="{_MARGIN_L}" y1="{gy:.2f}" x2="{_MARGIN_L + _PLOT_W}" '
                   f'y2="{gy:.2f}" stroke="#e5e5e5" stroke-width="1"/>')
        out.append(f'<text x="{gx:.2f}" y="{_MARGIN_T + _PLOT_H + 18}" '
                   f'text-anchor="middle" font-size="11" fill="#555">{xv:.2f}</text>')
        out.append(f'<text x="{_MARGIN_L - 8}" y="{gy + 4:.2f}" text-anchor="end" '
                   f'font-size="11" fill="#555">{yv:.3f}</text>')
    out.append(f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" x2="{_MARGIN_L}" '
               f'y2="{_MARGIN_T + _PLOT_H}" stroke="#222" stroke-width="1"/>')
    out.append(f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T + _PLOT_H}" '
               f'x2="{_MARGIN_L + _PLOT_W}" y2="{_MARGIN_T + _PLOT_H}" '
               f'stroke="#222" stroke-width="1"/>')
    out.append(f'<text x="{_MARGIN_L + _PLOT_W / 2:.2f}" y="{height - 12}" '
               f'text-anchor="middle" font-size="12" fill="#333">keep ratio</text>')
    out.append(f'<text x="16" y="{_MARGIN_T + _PLOT_H / 2:.2f}" text-anchor="middle" '
               f'font-size="12" fill="#333" transform="rotate(-90, 16, '
               f'{_MARGIN_T + _PLOT_H / 2:.2f})">acc@1</text>')

    for ci, name in enumerate(strategies):
        color = _PALETTE[ci % len(_PALETTE)]
        pts = points[name]
        coords = " ".join(f"{sx(x)},{sy(y)}" for x, y in pts)
        if len(pts) > 1:
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                       f'stroke-width="2"/>')
        for x, y in pts:
            out.append(f'<circle cx="{sx(x)}" cy="{sy(y)}" r="3.5" fill="{color}"/>')
        ly = _MARGIN_T + 8 + 16 * ci
        lx = _MARGIN_L + _PLOT_W - 150
        out.append(f'<rect x="{lx}" y="{ly}" width="12" height="12" fill="{color}"/>')
        out.append(f'<text x="{lx + 17}" y="{ly + 10}" font-size="11" '
                   f'fill="#333">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
