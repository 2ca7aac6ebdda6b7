"""Self-contained SVG trace plots.

Hand-rolled rather than delegated to a plotting library so the output is
byte-deterministic (no timestamps, ids or library version strings) and
needs no display stack.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DataError

__all__ = ["read_trace_csv", "traceplot_svg", "render_traceplot"]

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def read_trace_csv(path):
    """Parse a trace CSV (header ``t,<name>...``); errors carry line numbers."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise DataError(f"{path}:1: empty trace file")
    header = [h.strip() for h in lines[0].split(",")]
    if len(header) < 2 or header[0] != "t":
        raise DataError(f"{path}:1: expected header 't,<coord>...', got {lines[0]!r}")
    names = header[1:]
    ts, rows = [], []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(parts)}")
        try:
            ts.append(float(parts[0]))
            rows.append([float(v) for v in parts[1:]])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}:2: no data rows")
    return np.array(ts), np.array(rows), names


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / n))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-12 * span:
        ticks.append(0.0 if abs(v) < 1e-12 * span else v)
        v += step
    return ticks


def traceplot_svg(ts: np.ndarray, values: np.ndarray, names, title: str = "") -> str:
    """SVG line chart: one polyline per column, labeled axes, fixed size."""
    width, height = 900, 320
    ml, mr, mt, mb = 60, 15, 28, 42
    pw, ph = width - ml - mr, height - mt - mb
    t_lo, t_hi = float(np.min(ts)), float(np.max(ts))
    if t_hi <= t_lo:
        t_hi = t_lo + 1.0
    v_lo, v_hi = float(np.min(values)), float(np.max(values))
    if v_hi <= v_lo:
        v_lo, v_hi = v_lo - 0.5, v_hi + 0.5
    pad = 0.05 * (v_hi - v_lo)
    v_lo, v_hi = v_lo - pad, v_hi + pad

    def sx(t):
        return ml + pw * (t - t_lo) / (t_hi - t_lo)

    def sy(v):
        return mt + ph * (1.0 - (v - v_lo) / (v_hi - v_lo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333" stroke-width="1"/>',
    ]
    if title:
        out.append(
            f'<text x="{ml}" y="18" font-family="sans-serif" font-size="13" fill="#111">{title}</text>'
        )
    for tv in _ticks(t_lo, t_hi):
        x = sx(tv)
        out.append(f'<line x1="{x:.2f}" y1="{mt + ph}" x2="{x:.2f}" y2="{mt + ph + 4}" stroke="#333"/>')
        out.append(
            f'<text x="{x:.2f}" y="{mt + ph + 16}" font-family="sans-serif" font-size="10" '
            f'text-anchor="middle" fill="#333">{tv:.6g}</text>'
        )
    for vv in _ticks(v_lo, v_hi):
        y = sy(vv)
        out.append(f'<line x1="{ml - 4}" y1="{y:.2f}" x2="{ml}" y2="{y:.2f}" stroke="#333"/>')
        out.append(
            f'<text x="{ml - 7}" y="{y + 3:.2f}" font-family="sans-serif" font-size="10" '
            f'text-anchor="end" fill="#333">{vv:.6g}</text>'
        )
    out.append(
        f'<text x="{ml + pw / 2:.2f}" y="{height - 8}" font-family="sans-serif" font-size="11" '
        f'text-anchor="middle" fill="#111">time</text>'
    )
    out.append(
        f'<text x="14" y="{mt + ph / 2:.2f}" font-family="sans-serif" font-size="11" '
        f'text-anchor="middle" fill="#111" transform="rotate(-90 14 {mt + ph / 2:.2f})">coordinate value</text>'
    )
    for k, name in enumerate(names):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(ts, values[:, k]))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{pts}"/>')
        out.append(
            f'<text x="{ml + pw - 6}" y="{mt + 14 + 13 * k}" font-family="sans-serif" font-size="10" '
            f'text-anchor="end" fill="{color}">{name}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_traceplot(csv_path, svg_path, title: str = "") -> None:
    ts, values, names = read_trace_csv(csv_path)
    svg = traceplot_svg(ts, values, names, title=title)
    with open(svg_path, "w", newline="") as fh:
        fh.write(svg)
