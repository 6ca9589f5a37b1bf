"""File-based plot emission: temperature fields as colored node squares and
error curves as polylines, each with its underlying CSV alongside."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .scanpath import GridSpec

FIELD_CLAMP = (25.0, 2000.0)  # degC

# Fixed cold-to-hot colormap stops (fraction, r, g, b).
_STOPS = (
    (0.0, 15, 25, 80),
    (0.25, 40, 90, 200),
    (0.5, 230, 200, 60),
    (0.75, 240, 120, 30),
    (1.0, 255, 40, 40),
)


def _color(fraction: float) -> str:
    f = min(max(fraction, 0.0), 1.0)
    for (f0, r0, g0, b0), (f1, r1, g1, b1) in zip(_STOPS[:-1], _STOPS[1:]):
        if f <= f1:
            w = 0.0 if f1 == f0 else (f - f0) / (f1 - f0)
            r = round(r0 + w * (r1 - r0))
            g = round(g0 + w * (g1 - g0))
            b = round(b0 + w * (b1 - b0))
            return f"#{r:02x}{g:02x}{b:02x}"
    return "#ff2828"


def export_field_svg(
    temps: np.ndarray,
    grid: GridSpec,
    path,
    clamp: tuple[float, float] = FIELD_CLAMP,
    cell_px: int = 8,
) -> None:
    """Render one temperature frame as colored node squares; writes the
    matching CSV (node, ix, iy, temperature) next to the SVG."""
    nx, ny = grid.node_counts
    temps = np.asarray(temps, dtype=np.float64).reshape(-1)
    if temps.size != nx * ny:
        raise ValueError(f"frame has {temps.size} temps, grid wants {nx * ny}")
    lo, hi = clamp
    width, height = nx * cell_px, ny * cell_px
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    ]
    for iy in range(ny):
        for ix in range(nx):
            t = temps[iy * nx + ix]
            color = _color((t - lo) / (hi - lo))
            # SVG y axis points down; flip so iy=0 is the bottom row.
            py = (ny - 1 - iy) * cell_px
            parts.append(
                f'<rect x="{ix * cell_px}" y="{py}" width="{cell_px}" '
                f'height="{cell_px}" fill="{color}"/>'
            )
    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts), encoding="utf-8")
    with open(path.with_suffix(".csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "ix", "iy", "temperature_c"])
        for iy in range(ny):
            for ix in range(nx):
                writer.writerow([iy * nx + ix, ix, iy, repr(float(temps[iy * nx + ix]))])


def export_curve_svg(values, path, width: int = 640, height: int = 360) -> None:
    """Render a per-timestep curve as an SVG polyline plus (timestep, value) CSV."""
    values = [float(v) for v in values]
    if not values:
        raise ValueError("cannot plot an empty curve")
    vmax = max(values) or 1.0
    margin = 20
    px = lambda i: margin + i * (width - 2 * margin) / max(len(values) - 1, 1)
    py = lambda v: height - margin - v / vmax * (height - 2 * margin)
    points = " ".join(f"{px(i):.2f},{py(v):.2f}" for i, v in enumerate(values))
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
        f'<rect width="{width}" height="{height}" fill="white"/>'
        f'<polyline points="{points}" fill="none" stroke="#c02874" stroke-width="2"/>'
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>'
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        f'stroke="black"/>'
        "</svg>"
    )
    path = Path(path)
    path.write_text(svg, encoding="utf-8")
    with open(path.with_suffix(".csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestep", "value"])
        for i, v in enumerate(values):
            writer.writerow([i, repr(v)])
