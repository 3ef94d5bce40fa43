"""Minimal SVG 1.1 line plots (axes, ticks, polylines, legend)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
WIDTH, HEIGHT = 640, 400
PAD_L, PAD_R, PAD_T, PAD_B = 80, 20, 40, 50


def _range(values):
    finite = values[np.isfinite(values)]
    if len(finite) == 0:
        return 0.0, 1.0
    lo, hi = float(finite.min()), float(finite.max())
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        pad = 0.5 * max(abs(hi), 1.0) * 1e-3 + 1e-12
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _fmt(x):
    return f"{x:.4g}"


def line_plot(x, series: dict, *, title: str = "", xlabel: str = "t") -> str:
    """Render ``series`` (label -> y values) against ``x`` as an SVG document."""
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    x0, x1 = _range(x)
    y0, y1 = _range(np.concatenate([*ys.values()]) if ys else np.array([0.0]))
    pw, ph = WIDTH - PAD_L - PAD_R, HEIGHT - PAD_T - PAD_B

    def sx(v):
        return PAD_L + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return PAD_T + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15">{escape(title)}</text>',
        f'<line x1="{PAD_L}" y1="{PAD_T + ph}" x2="{PAD_L + pw}" y2="{PAD_T + ph}" stroke="black"/>',
        f'<line x1="{PAD_L}" y1="{PAD_T}" x2="{PAD_L}" y2="{PAD_T + ph}" stroke="black"/>',
    ]
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<line x1="{sx(xv):.2f}" y1="{PAD_T + ph}" x2="{sx(xv):.2f}" '
                   f'y2="{PAD_T + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{sx(xv):.2f}" y="{PAD_T + ph + 18}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{_fmt(xv)}</text>')
        out.append(f'<line x1="{PAD_L - 5}" y1="{sy(yv):.2f}" x2="{PAD_L}" y2="{sy(yv):.2f}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{PAD_L - 8}" y="{sy(yv) + 4:.2f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{_fmt(yv)}</text>')
    out.append(f'<text x="{PAD_L + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    for idx, (label, y) in enumerate(ys.items()):
        color = COLORS[idx % len(COLORS)]
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[ok], y[ok]))
        if pts:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = PAD_T + 14 * idx + 10
        out.append(f'<line x1="{PAD_L + pw - 150}" y1="{ly}" x2="{PAD_L + pw - 130}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{PAD_L + pw - 125}" y="{ly + 4}" font-family="sans-serif" '
                   f'font-size="11">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def trace_plots(trace) -> dict:
    """SVG documents for the standard trace panels, keyed by file stem."""
    t = trace.column("t")
    plots = {}
    if trace.op_ids:
        plots["lambda"] = line_plot(t, {k: trace.column(f"lambda[{k}]") for k in trace.op_ids},
                                    title="first eigenvalues")
    plots["curvature"] = line_plot(
        t, {"min R": trace.column("minR"), "max R": trace.column("maxR"),
            "Rbar": trace.column("Rbar")}, title="curvature extrema and average")
    plots["volume"] = line_plot(t, {"volume": trace.column("volume")}, title="total volume")
    d = trace.column("diameter")
    if np.any(np.isfinite(d)):
        plots["diameter"] = line_plot(t, {"diameter": d}, title="diameter")
    return plots
