"""Minimal SVG time-series plots (polylines on autoscaled linear axes)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#7f7f7f")

WIDTH = 640
PANEL_HEIGHT = 260
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 130, 30, 45


def nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _num(v: float) -> str:
    return f"{v:.2f}"


def _panel(series, title, xlabel, ylabel, top) -> list[str]:
    t_all = np.concatenate([np.asarray(t, float) for t, _ in series.values()]) if series else np.zeros(1)
    y_all = np.concatenate([np.asarray(y, float) for _, y in series.values()]) if series else np.zeros(1)
    y_all = y_all[np.isfinite(y_all)]
    x0, x1 = float(t_all.min()), float(t_all.max())
    y0, y1 = (float(y_all.min()), float(y_all.max())) if y_all.size else (0.0, 1.0)
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        pad = abs(y0) * 0.1 or 1.0
        y0, y1 = y0 - pad, y1 + pad
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = PANEL_HEIGHT - MARGIN_T - MARGIN_B
    left, base = MARGIN_L, top + MARGIN_T

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return base + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<text x="{WIDTH / 2:.0f}" y="{top + 18}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{left}" y="{base}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
    ]
    for v in nice_ticks(x0, x1):
        X = sx(v)
        out.append(f'<line x1="{_num(X)}" y1="{base + ph}" x2="{_num(X)}" y2="{base + ph + 5}" stroke="#000"/>')
        out.append(f'<text x="{_num(X)}" y="{base + ph + 18}" text-anchor="middle" font-size="11">{v:g}</text>')
    for v in nice_ticks(y0, y1):
        Y = sy(v)
        out.append(f'<line x1="{left - 5}" y1="{_num(Y)}" x2="{left}" y2="{_num(Y)}" stroke="#000"/>')
        out.append(f'<text x="{left - 8}" y="{_num(Y + 4)}" text-anchor="end" font-size="11">{v:.3g}</text>')
    out.append(
        f'<text x="{left + pw / 2:.0f}" y="{base + ph + 36}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="16" y="{base + ph / 2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {base + ph / 2:.0f})">{escape(ylabel)}</text>'
    )
    for k, (label, (t, y)) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_num(sx(a))},{_num(sy(b))}" for a, b in zip(t, y) if math.isfinite(b))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = base + 12 + 16 * k
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly + 4}" font-size="11">{escape(str(label))}</text>')
    return out


def time_series_svg(panels: list[dict]) -> str:
    """Render stacked panels; each panel is ``{"title", "xlabel", "ylabel", "series": {label: (t, y)}}``."""
    height = PANEL_HEIGHT * max(1, len(panels))
    body = []
    for k, p in enumerate(panels):
        body += _panel(p["series"], p.get("title", ""), p.get("xlabel", "t"), p.get("ylabel", ""), k * PANEL_HEIGHT)
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">'
    )
    return "\n".join([head, f'<rect width="{WIDTH}" height="{height}" fill="#fff"/>', *body, "</svg>"]) + "\n"
