"""Bit-stable CSV/JSON writers and a small self-contained SVG line plotter.

Every file carries the run configuration: CSV files start with a ``#`` comment
line holding it as JSON, SVG files hold it in a ``<desc>`` element and JSON
documents under a ``"config"`` key.
"""

import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["fmt", "write_csv", "read_csv", "write_json", "svg_plot", "write_svg"]

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"]


def fmt(x):
    """Shortest-safe round-trip float text: 17 significant digits."""
    return format(float(x), ".17g")


def _provenance(config):
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def write_csv(path, header, rows, config):
    """Write a CSV with a provenance comment line, header, LF endings."""
    lines = ["# config=" + _provenance(config), ",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_csv(path):
    """Return ``(config, header, data)`` from a file made by :func:`write_csv`."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    config = json.loads(text[0][len("# config="):])
    header = text[1].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in text[2:]])
    return config, header, data.reshape(-1, len(header))


def write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n")


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * step:
        out.append(round(v, 12))
        v += step
    return out


def svg_plot(series, config, title="", xlabel="", ylabel="", logx=False, width=640, height=400):
    """Render ``[(label, xs, ys), ...]`` as polylines with axes and a legend.

    With ``logx`` the x axis is logarithmic and non-positive x values are
    dropped.
    """
    ml, mr, mt, mb = 70, 150, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    cleaned = []
    for label, xs, ys in series:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        keep = np.isfinite(xs) & np.isfinite(ys)
        if logx:
            keep &= xs > 0
        xs, ys = xs[keep], ys[keep]
        if logx:
            xs = np.log10(xs)
        cleaned.append((label, xs, ys))
    allx = np.concatenate([c[1] for c in cleaned]) if cleaned else np.array([0.0, 1.0])
    ally = np.concatenate([c[2] for c in cleaned]) if cleaned else np.array([0.0, 1.0])
    if allx.size == 0:
        allx, ally = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(min(ally.min(), 0.0)), float(ally.max())
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y1 = y0 + 1.0

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f"<desc>config={escape(_provenance(config))}</desc>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{ml + pw / 2:.2f}" y="{mt - 15}" text-anchor="middle" font-size="13">{escape(title)}</text>')
    for t in _ticks(x0, x1):
        if t < x0 or t > x1:
            continue
        label = f"1e{t:g}" if logx else f"{t:g}"
        out.append(f'<line x1="{px(t):.2f}" y1="{mt + ph}" x2="{px(t):.2f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{mt + ph + 18}" text-anchor="middle">{label}</text>')
    for t in _ticks(y0, y1):
        if t < y0 or t > y1:
            continue
        out.append(f'<line x1="{ml - 5}" y1="{py(t):.2f}" x2="{ml}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{py(t) + 4:.2f}" text-anchor="end">{t:g}</text>')
    if xlabel:
        out.append(f'<text x="{ml + pw / 2:.2f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(
            f'<text x="15" y="{mt + ph / 2:.2f}" text-anchor="middle" '
            f'transform="rotate(-90 15 {mt + ph / 2:.2f})">{escape(ylabel)}</text>'
        )
    for i, (label, xs, ys) in enumerate(cleaned):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        if pts:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = mt + 15 + 16 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 35}" y="{ly + 4}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, series, config, **kwargs):
    Path(path).write_text(svg_plot(series, config, **kwargs), encoding="utf-8", newline="\n")
