"""Minimal self-contained log-log line plots written as SVG text."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 78, 170, 36, 52


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    dashed: bool = False
    color: str | None = None


def _positive(s: Series) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(s.x, dtype=float)
    y = np.asarray(s.y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    return x[keep], y[keep]


def _decades(lo: float, hi: float) -> tuple[float, float]:
    a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    if b <= a:
        a, b = a - 1, b + 1
    return float(a), float(b)


def _fmt_pow(e: int) -> str:
    return f"1e{e}"


def loglog_svg(series: list[Series], title: str, xlabel: str, ylabel: str) -> str:
    """Render curves on log axes spanning whole decades.

    Non-positive or non-finite points are dropped.  A series with one
    remaining point is drawn as a marker.
    """
    kept = [(s, *_positive(s)) for s in series]
    xs = np.concatenate([x for _, x, _ in kept if x.size] or [np.array([1.0, 10.0])])
    ys = np.concatenate([y for _, _, y in kept if y.size] or [np.array([1.0, 10.0])])
    x0, x1 = _decades(xs.min(), xs.max())
    y0, y1 = _decades(ys.min(), ys.max())
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(v):
        return LEFT + (np.log10(v) - x0) / (x1 - x0) * pw

    def py(v):
        return TOP + (y1 - np.log10(v)) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{LEFT + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for e in range(int(x0), int(x1) + 1):
        gx = LEFT + (e - x0) / (x1 - x0) * pw
        out.append(f'<line x1="{gx:.1f}" y1="{TOP}" x2="{gx:.1f}" y2="{TOP + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{gx:.1f}" y="{TOP + ph + 16}" text-anchor="middle">{_fmt_pow(e)}</text>')
    for e in range(int(y0), int(y1) + 1):
        gy = TOP + (y1 - e) / (y1 - y0) * ph
        out.append(f'<line x1="{LEFT}" y1="{gy:.1f}" x2="{LEFT + pw}" y2="{gy:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{LEFT - 6}" y="{gy + 4:.1f}" text-anchor="end">{_fmt_pow(e)}</text>')
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">{escape(ylabel)}</text>')

    for idx, (s, x, y) in enumerate(kept):
        color = s.color or PALETTE[idx % len(PALETTE)]
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        if x.size == 1:
            out.append(f'<circle cx="{px(x[0]):.2f}" cy="{py(y[0]):.2f}" r="3" fill="{color}"/>')
        elif x.size > 1:
            pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px(x), py(y)))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        ly = TOP + 14 + 18 * idx
        lx = LEFT + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" stroke="{color}" '
                   f'stroke-width="2"{dash}/>')
        out.append(f'<text x="{lx + 28}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
