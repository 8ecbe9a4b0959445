"""Minimal self-contained SVG line chart for the learning curves."""

from __future__ import annotations

import math
from typing import Any

COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2")


def learning_curve_svg(summary: dict[int, dict[str, Any]], width: int = 640, height: int = 420) -> str:
    """Mean +- std of the learned value vs log10(T), one series per m, with V^m_* as dashed lines."""
    left, right, top, bottom = 60, 110, 20, 50
    pw, ph = width - left - right, height - top - bottom
    Ts = sorted({T for e in summary.values() for T in e["T"]})
    xs = [math.log10(T) for T in Ts]
    lo_y = min(min(m - s for m, s in zip(e["mean"], e["std"])) for e in summary.values())
    hi_y = max(max(max(m + s for m, s in zip(e["mean"], e["std"])), e["v_m_star"]) for e in summary.values())
    if hi_y - lo_y < 1e-9:
        lo_y, hi_y = lo_y - 1, hi_y + 1
    x0, x1 = min(xs), max(xs) if max(xs) > min(xs) else min(xs) + 1

    def px(x: float) -> float:
        return left + (x - x0) / (x1 - x0) * pw

    def py(y: float) -> float:
        return top + (hi_y - y) / (hi_y - lo_y) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for x, T in zip(xs, Ts):
        parts.append(f'<text x="{px(x):.1f}" y="{top + ph + 15}" text-anchor="middle">{T:g}</text>')
    for k in range(5):
        y = lo_y + (hi_y - lo_y) * k / 4
        parts.append(f'<text x="{left - 5}" y="{py(y) + 4:.1f}" text-anchor="end">{y:.3g}</text>')
    parts.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">trajectory length T</text>')
    for i, (m, e) in enumerate(sorted(summary.items())):
        c = COLORS[i % len(COLORS)]
        pts = [(px(math.log10(T)), py(v)) for T, v in zip(e["T"], e["mean"])]
        band_hi = [(px(math.log10(T)), py(v + s)) for T, v, s in zip(e["T"], e["mean"], e["std"])]
        band_lo = [(px(math.log10(T)), py(v - s)) for T, v, s in zip(e["T"], e["mean"], e["std"])]
        poly = " ".join(f"{x:.1f},{y:.1f}" for x, y in band_hi + band_lo[::-1])
        parts.append(f'<polygon points="{poly}" fill="{c}" fill-opacity="0.15" stroke="none"/>')
        path = " ".join(("M" if j == 0 else "L") + f"{x:.1f},{y:.1f}" for j, (x, y) in enumerate(pts))
        parts.append(f'<path d="{path}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        ys = py(e["v_m_star"])
        parts.append(
            f'<line x1="{left}" y1="{ys:.1f}" x2="{left + pw}" y2="{ys:.1f}" stroke="{c}" stroke-dasharray="4,3"/>'
        )
        parts.append(f'<text x="{left + pw + 8}" y="{top + 14 + 16 * i}" fill="{c}">m = {m}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
