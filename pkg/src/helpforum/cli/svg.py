"""Minimal box-plot renderer emitting standalone SVG."""

from __future__ import annotations

from typing import Dict, List, Sequence
from xml.sax.saxutils import escape

import numpy as np


def box_stats(values: Sequence[float]) -> Dict[str, float]:
    """Quartiles and 1.5 IQR whiskers (clipped to the data)."""
    v = np.sort(np.asarray(values, dtype=float))
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo = v[v >= q1 - 1.5 * iqr].min()
    hi = v[v <= q3 + 1.5 * iqr].max()
    return {
        "q1": float(q1), "median": float(med), "q3": float(q3), "lo": float(lo), "hi": float(hi),
        "mean": float(v.mean()), "outliers": [float(x) for x in v[(v < lo) | (v > hi)]],
    }


def boxplot_svg(groups: Dict[str, List[float]], title: str = "", ylabel: str = "", width: int = 480, height: int = 320) -> str:
    names = [k for k, v in groups.items() if len(v)]
    stats = {k: box_stats(groups[k]) for k in names}
    top = max([s["hi"] for s in stats.values()] + [max(s["outliers"], default=0) for s in stats.values()] + [1.0])
    left, right, upper, lower = 56, 16, 36, 40
    ph = height - upper - lower
    pw = width - left - right

    def y(v):
        return upper + ph * (1 - v / (top * 1.05))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{left}" y1="{upper}" x2="{left}" y2="{upper + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{upper + ph}" x2="{left + pw}" y2="{upper + ph}" stroke="black"/>',
        f'<text transform="translate(14,{upper + ph / 2}) rotate(-90)" text-anchor="middle">{escape(ylabel)}</text>',
    ]
    for k in range(6):
        v = top * 1.05 * k / 5
        parts.append(f'<text x="{left - 6}" y="{y(v) + 4:.1f}" text-anchor="end">{v:.0f}</text>')
    slot = pw / max(1, len(names))
    for i, name in enumerate(names):
        s = stats[name]
        cx = left + slot * (i + 0.5)
        bw = slot * 0.5
        parts += [
            f'<line x1="{cx}" y1="{y(s["lo"]):.1f}" x2="{cx}" y2="{y(s["q1"]):.1f}" stroke="black"/>',
            f'<line x1="{cx}" y1="{y(s["q3"]):.1f}" x2="{cx}" y2="{y(s["hi"]):.1f}" stroke="black"/>',
            f'<rect x="{cx - bw / 2:.1f}" y="{y(s["q3"]):.1f}" width="{bw:.1f}" height="{max(0.5, y(s["q1"]) - y(s["q3"])):.1f}" fill="#9ecae1" stroke="black"/>',
            f'<line x1="{cx - bw / 2:.1f}" y1="{y(s["median"]):.1f}" x2="{cx + bw / 2:.1f}" y2="{y(s["median"]):.1f}" stroke="black" stroke-width="2"/>',
            f'<circle cx="{cx}" cy="{y(s["mean"]):.1f}" r="3" fill="white" stroke="black"/>',
            f'<text x="{cx}" y="{upper + ph + 18}" text-anchor="middle">{escape(name)}</text>',
        ]
        for o in s["outliers"]:
            parts.append(f'<circle cx="{cx}" cy="{y(o):.1f}" r="2" fill="none" stroke="#555"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
