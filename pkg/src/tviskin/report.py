"""CSV tables and minimal SVG charts (line charts and heat maps).

Output is deterministic: numbers are written with fixed formats and no
timestamps, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = (70, 20, 40, 50)  # left, right, top, bottom
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_json(path, doc) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def _clean(obj):
    """JSON-safe copy: arrays to lists, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if np.isfinite(v) else str(float(v))
    return str(v)


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    return np.linspace(lo, hi, n)


def _range(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if not v.size:
        return 0.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def _frame(title, xlabel, ylabel, xr, yr):
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(*xr):
        x = left + (t - xr[0]) / (xr[1] - xr[0]) * pw
        out.append(f'<text x="{x:.1f}" y="{top + ph + 15}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(*yr):
        y = top + ph - (t - yr[0]) / (yr[1] - yr[0]) * ph
        out.append(f'<text x="{left - 5}" y="{y + 4:.1f}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="15" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 15 {top + ph / 2:.1f})">{_esc(ylabel)}</text>')
    return out, (left, top, pw, ph)


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def line_chart(path, series: dict, title: str = "", xlabel: str = "", ylabel: str = "") -> Path:
    """Write an SVG line chart; ``series`` maps a label to (x, y) arrays."""
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()]) if series else [0, 1]
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()]) if series else [0, 1]
    xr, yr = _range(xs), _range(ys)
    out, (left, top, pw, ph) = _frame(title, xlabel, ylabel, xr, yr)
    for k, (label, (x, y)) in enumerate(series.items()):
        colour = PALETTE[k % len(PALETTE)]
        pts = [(left + (a - xr[0]) / (xr[1] - xr[0]) * pw, top + ph - (b - yr[0]) / (yr[1] - yr[0]) * ph)
               for a, b in zip(np.asarray(x, float), np.asarray(y, float)) if np.isfinite(a) and np.isfinite(b)]
        if pts:
            d = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{d}"/>')
        out.append(f'<text x="{left + 8}" y="{top + 14 + 13 * k}" fill="{colour}">{_esc(label)}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path


def _colour(t: float) -> str:
    # dark blue -> yellow ramp
    t = min(max(t, 0.0), 1.0)
    r, g, b = int(30 + 225 * t), int(30 + 200 * t), int(120 - 90 * t)
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(path, x, y, values, title: str = "", xlabel: str = "x (mm)",
            ylabel: str = "y (mm)") -> Path:
    """Write an SVG heat map of scattered cell values at (x, y) centres.

    Non-finite cells are drawn grey; cell size follows the smallest spacing.
    """
    x, y, v = (np.asarray(a, dtype=float).ravel() for a in (x, y, values))
    xr, yr = _range(x), _range(y)
    out, (left, top, pw, ph) = _frame(title, xlabel, ylabel, xr, yr)
    lo, hi = _range(v)
    ux, uy = np.unique(x), np.unique(y)
    cw = (np.diff(ux).min() if ux.size > 1 else 1.0) / (xr[1] - xr[0]) * pw
    chh = (np.diff(uy).min() if uy.size > 1 else 1.0) / (yr[1] - yr[0]) * ph
    for a, b, val in zip(x, y, v):
        cx = left + (a - xr[0]) / (xr[1] - xr[0]) * pw
        cy = top + ph - (b - yr[0]) / (yr[1] - yr[0]) * ph
        fill = _colour((val - lo) / (hi - lo)) if np.isfinite(val) else "#bbbbbb"
        out.append(f'<rect x="{cx - cw / 2:.2f}" y="{cy - chh / 2:.2f}" width="{cw:.2f}" '
                   f'height="{chh:.2f}" fill="{fill}"/>')
    out.append(f'<text x="{WIDTH - MARGIN[1]}" y="{MARGIN[2] - 5}" text-anchor="end">'
               f'range {lo:.4g} .. {hi:.4g}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path
