"""Self-contained SVG scatter plots (no external assets, no plotting library)."""
from __future__ import annotations

import math
from html import escape
from typing import Optional, Sequence

import numpy as np

WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=70, right=20, top=40, bottom=55)


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not hi > lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def scatter_svg(x: Sequence[float], y: Sequence[float], *, title: str = "", xlabel: str = "",
                ylabel: str = "", log_y: bool = False, highlight: Optional[Sequence[bool]] = None,
                hline: Optional[float] = None, note: str = "") -> str:
    """Scatter of finite (x, y) pairs as an SVG document string."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    hl = np.zeros(len(x), dtype=bool) if highlight is None else np.asarray(highlight, dtype=bool)
    ok = np.isfinite(x) & np.isfinite(y) & ((y > 0) if log_y else True)
    x, y, hl = x[ok], y[ok], hl[ok]
    yt = np.log10(y) if log_y else y
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    if len(x):
        x0, x1 = float(x.min()), float(x.max())
        y0, y1 = float(yt.min()), float(yt.max())
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if hline is not None and (hline > 0 or not log_y):
        hv = math.log10(hline) if log_y else hline
        y0, y1 = min(y0, hv), max(y1, hv)
    padx = 0.05 * (x1 - x0 or 1.0)
    pady = 0.05 * (y1 - y0 or 1.0)
    x0, x1, y0, y1 = x0 - padx, x1 + padx, y0 - pady, y1 + pady

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
           f'fill="none" stroke="black"/>']
    for t in _nice_ticks(x0, x1):
        px = sx(t)
        out.append(f'<line x1="{px:.2f}" y1="{MARGIN["top"] + ph}" x2="{px:.2f}" '
                   f'y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(y0, y1):
        py = sy(t)
        label = f"{10**t:.3g}" if log_y else f"{t:g}"
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{py:.2f}" x2="{MARGIN["left"]}" '
                   f'y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{py + 4:.2f}" text-anchor="end">{label}</text>')
    if hline is not None and (hline > 0 or not log_y):
        py = sy(math.log10(hline) if log_y else hline)
        out.append(f'<line x1="{MARGIN["left"]}" y1="{py:.2f}" x2="{MARGIN["left"] + pw}" y2="{py:.2f}" '
                   f'stroke="#c33" stroke-dasharray="4 3"/>')
    for xi, yi, h in zip(x, yt, hl):
        colour = "#d62728" if h else "#1f77b4"
        out.append(f'<circle cx="{sx(xi):.2f}" cy="{sy(yi):.2f}" r="{4 if h else 2.5}" '
                   f'fill="{colour}" fill-opacity="0.7"/>')
    out.append(f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 12}" text-anchor="middle">'
               f'{escape(xlabel)}</text>')
    cy = MARGIN["top"] + ph / 2
    out.append(f'<text x="16" y="{cy}" text-anchor="middle" transform="rotate(-90 16 {cy})">'
               f'{escape(ylabel)}</text>')
    if note:
        out.append(f'<text x="{MARGIN["left"] + pw - 4}" y="{MARGIN["top"] + 14}" text-anchor="end" '
                   f'font-size="10">{escape(note)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
