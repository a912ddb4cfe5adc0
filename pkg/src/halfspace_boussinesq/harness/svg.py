"""Minimal log-log line plots written as standalone SVG text."""

from __future__ import annotations

import math
from html import escape

import numpy as np

__all__ = ["loglog_svg"]

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=150, top=40, bottom=50)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _decades(lo: float, hi: float) -> list[float]:
    return [10.0**k for k in range(math.floor(lo), math.ceil(hi) + 1)]


def loglog_svg(
    t,
    curves: dict,
    references: dict | None = None,
    title: str = "",
    xlabel: str = "1 + t",
) -> str:
    """Plot each positive curve against ``1 + t`` on log-log axes.

    Args:
        t: Sample times.
        curves: Label to values.  Non-positive samples are skipped.
        references: Label to ``(slope, anchor_label)``.  Each guide line has
            the given slope and passes through the first point of the anchor
            curve.
        title: Plot title.
        xlabel: Horizontal axis label.
    """
    x = np.log10(1.0 + np.asarray(t, dtype=float))
    series = {}
    for name, vals in curves.items():
        v = np.asarray(vals, dtype=float)
        ok = (v > 0) & np.isfinite(v) & np.isfinite(x)
        if ok.any():
            series[name] = (x[ok], np.log10(v[ok]))
    if not series:
        raise ValueError("nothing positive to plot")
    xs = np.concatenate([s[0] for s in series.values()])
    ys = np.concatenate([s[1] for s in series.values()])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN["top"] + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>',
    ]
    for d in _decades(x0, x1):
        lv = math.log10(d)
        if x0 <= lv <= x1:
            out.append(
                f'<line x1="{px(lv):.2f}" y1="{MARGIN["top"] + ph}" x2="{px(lv):.2f}" '
                f'y2="{MARGIN["top"] + ph + 5}" stroke="black"/>'
                f'<text x="{px(lv):.2f}" y="{MARGIN["top"] + ph + 18}" '
                f'text-anchor="middle">1e{int(round(lv))}</text>'
            )
    for d in _decades(y0, y1):
        lv = math.log10(d)
        if y0 <= lv <= y1:
            out.append(
                f'<line x1="{MARGIN["left"] - 5}" y1="{py(lv):.2f}" x2="{MARGIN["left"]}" '
                f'y2="{py(lv):.2f}" stroke="black"/>'
                f'<text x="{MARGIN["left"] - 8}" y="{py(lv) + 4:.2f}" '
                f'text-anchor="end">1e{int(round(lv))}</text>'
            )
    out.append(
        f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" '
        f'text-anchor="middle">{escape(xlabel)}</text>'
    )
    legend_y = MARGIN["top"] + 10
    for i, (name, (sx, sy)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(sx, sy))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(
            f'<text x="{MARGIN["left"] + pw + 10}" y="{legend_y}" fill="{color}">'
            f"{escape(name)}</text>"
        )
        legend_y += 16
    for label, (slope, anchor) in (references or {}).items():
        if anchor not in series:
            continue
        ax, ay = series[anchor][0][0], series[anchor][1][0]
        ey = ay + slope * (x1 - ax)
        out.append(
            f'<line x1="{px(ax):.2f}" y1="{py(ay):.2f}" x2="{px(x1):.2f}" y2="{py(ey):.2f}" '
            'stroke="gray" stroke-dasharray="5,4"/>'
        )
        out.append(
            f'<text x="{MARGIN["left"] + pw + 10}" y="{legend_y}" fill="gray">'
            f"{escape(label)} slope {slope:.3g}</text>"
        )
        legend_y += 16
    out.append("</svg>")
    return "\n".join(out) + "\n"
