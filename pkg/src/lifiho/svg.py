"""Tiny SVG writer for the outage/takeover ellipse panels."""

from __future__ import annotations

import math
from typing import Any

PANEL_W = 320
PANEL_H = 260
MARGIN = 46
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _scale(lo: float, hi: float, a: float, b: float):
    span = (hi - lo) or 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def _ellipse(cell: dict[str, Any], sx, sy, color: str) -> list[str]:
    mx = cell["mean_outage_s"]
    my = cell["mean_takeover_cm"]
    out = [f'<circle cx="{sx(mx):.2f}" cy="{sy(my):.2f}" r="2.5" fill="{color}"/>']
    if not cell.get("axes"):
        return out
    # trace the ellipse outline in data space, then map each point
    (l1, v1), (l2, v2) = ((a["length"], a["direction"]) for a in cell["axes"])
    pts = []
    for k in range(49):
        th = 2 * math.pi * k / 48
        c, s = math.cos(th), math.sin(th)
        x = mx + l1 * c * v1[0] + l2 * s * v2[0]
        y = my + l1 * c * v1[1] + l2 * s * v2[1]
        pts.append(f"{sx(x):.2f},{sy(y):.2f}")
    out.append(f'<polyline points="{" ".join(pts)}" fill="{color}" fill-opacity="0.15" stroke="{color}"/>')
    return out


def ellipses_svg(summary: dict[str, Any]) -> str:
    """One panel per speed; outage (s) on x, takeover distance (cm) on y."""
    cells = summary["cells"]
    speeds = sorted({c["speed"] for c in cells})
    policies = list(dict.fromkeys(c["policy"] for c in cells))
    xs, ys = [0.0], [100.0, 135.0]
    for c in cells:
        for o in c["outcomes"]:
            xs.append(o["outage_s"])
            ys.append(o["takeover_cm"])
    x_hi = max(xs) * 1.05 or 1.0
    y_lo, y_hi = min(ys) - 2, max(ys) + 2

    width = PANEL_W * len(speeds)
    height = PANEL_H + 24 * ((len(policies) + 3) // 4) + 10
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="sans-serif" font-size="11">']
    for i, speed in enumerate(speeds):
        x0 = i * PANEL_W
        sx = _scale(0.0, x_hi, x0 + MARGIN, x0 + PANEL_W - 10)
        sy = _scale(y_lo, y_hi, PANEL_H - MARGIN + 10, 20)
        parts.append(f'<text x="{x0 + PANEL_W / 2:.1f}" y="14" text-anchor="middle">speed {speed:g} m/s</text>')
        parts.append(f'<rect x="{x0 + MARGIN}" y="20" width="{PANEL_W - MARGIN - 10}" '
                     f'height="{PANEL_H - MARGIN - 10}" fill="none" stroke="#999"/>')
        parts.append(f'<text x="{x0 + PANEL_W / 2:.1f}" y="{PANEL_H - 12}" text-anchor="middle">outage (s)</text>')
        parts.append(f'<text x="{x0 + 12}" y="{PANEL_H / 2:.1f}" transform="rotate(-90 {x0 + 12} {PANEL_H / 2:.1f})" '
                     f'text-anchor="middle">takeover (cm)</text>')
        for tick in (y_lo, (y_lo + y_hi) / 2, y_hi):
            parts.append(f'<text x="{x0 + MARGIN - 4}" y="{sy(tick) + 4:.2f}" text-anchor="end">{tick:.0f}</text>')
        for tick in (0.0, x_hi / 2, x_hi):
            parts.append(f'<text x="{sx(tick):.2f}" y="{PANEL_H - MARGIN + 24}" text-anchor="middle">{tick:.1f}</text>')
        for j, pol in enumerate(policies):
            cell = next((c for c in cells if c["speed"] == speed and c["policy"] == pol), None)
            if cell is not None:
                parts.extend(_ellipse(cell, sx, sy, COLORS[j % len(COLORS)]))
    for j, pol in enumerate(policies):
        lx = 10 + (j % 4) * 160
        ly = PANEL_H + 14 + 24 * (j // 4)
        color = COLORS[j % len(COLORS)]
        parts.append(f'<rect x="{lx}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{lx + 14}" y="{ly}">{pol}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
