"""SVG figures of a planar indicatrix and its osculating ellipse."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .config import DEFAULT_TOLERANCES, ToleranceConfig
from .geometry import direction_grid, indicatrix_point, osculating_ellipsoid
from .norms import FinslerNorm


class UnsupportedDimensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PlotSpec:
    """What to draw: the indicatrix (solid), ``E(y)`` (dotted) and an optional witness ray."""

    norm: FinslerNorm
    y: np.ndarray
    size: int = 480
    xi: np.ndarray | None = None
    samples: int = 720

    def __post_init__(self):
        if self.norm.dimension != 2:
            raise UnsupportedDimensionError(f"plots need n = 2, got n = {self.norm.dimension}")
        if self.samples < 720:
            raise ValueError("the indicatrix is drawn with at least 720 samples")
        if self.size < 64:
            raise ValueError("canvas size must be at least 64 px")


def _points_attr(coords) -> str:
    return " ".join(f"{x:.3f},{y:.3f}" for x, y in coords)


def render_svg(spec: PlotSpec, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> str:
    """SVG 1.1 document for ``spec``; identical inputs give identical bytes."""
    norm = spec.norm
    y = indicatrix_point(norm, spec.y)
    ellipse = osculating_ellipsoid(norm, y, tol)
    dirs, _ = direction_grid(2, spec.samples)
    curve = dirs / norm.values(dirs)[:, None]
    oval = ellipse.boundary(spec.samples)

    witness = None
    if spec.xi is not None:
        xi = np.asarray(spec.xi, dtype=float)
        xi = xi / math.sqrt(float(ellipse.quadratic(xi)))
        witness = (xi, norm(xi), math.sqrt(float(ellipse.quadratic(xi))))

    extent = max(np.abs(curve).max(), np.abs(oval).max())
    if witness is not None:
        extent = max(extent, np.abs(witness[0]).max())
    extent *= 1.12
    size = spec.size
    scale = size / (2.0 * extent)

    def to_px(p):
        p = np.atleast_2d(p)
        return np.stack([size / 2 + scale * p[:, 0], size / 2 - scale * p[:, 1]], axis=1)

    by = to_px(y)[0]
    mid = size / 2
    parts = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<!DOCTYPE svg PUBLIC "-//W3C//DTD SVG 1.1//EN" '
        '"http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd">',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        "<title>Indicatrix (solid) and osculating ellipsoid at y (dotted)</title>",
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
        f'<g id="axes" stroke="#bbbbbb" stroke-width="0.5">'
        f'<line x1="0" y1="{mid:.3f}" x2="{size}" y2="{mid:.3f}"/>'
        f'<line x1="{mid:.3f}" y1="0" x2="{mid:.3f}" y2="{size}"/></g>',
        f'<polygon id="indicatrix" points="{_points_attr(to_px(curve))}" '
        'fill="none" stroke="black" stroke-width="1.5"/>',
        f'<polygon id="ellipsoid" points="{_points_attr(to_px(oval))}" '
        'fill="none" stroke="black" stroke-width="1.5" stroke-dasharray="1.5,3.5" stroke-linecap="round"/>',
        f'<circle id="base-point" cx="{by[0]:.3f}" cy="{by[1]:.3f}" r="3" fill="black"/>',
        f'<text x="{by[0] + 6:.3f}" y="{by[1] - 6:.3f}" font-family="serif" font-size="14">y</text>',
    ]
    if witness is not None:
        xi, F_xi, rel = witness
        origin, tip = to_px(np.zeros(2))[0], to_px(xi)[0]
        label = escape(f"F(ξ) = {F_xi:.6f}, |ξ|_y = {rel:.6f}")
        parts += [
            f'<line id="witness-ray" x1="{origin[0]:.3f}" y1="{origin[1]:.3f}" '
            f'x2="{tip[0]:.3f}" y2="{tip[1]:.3f}" stroke="#b22222" stroke-width="1"/>',
            f'<circle id="witness" cx="{tip[0]:.3f}" cy="{tip[1]:.3f}" r="3" fill="#b22222"/>',
            f'<text x="8" y="{size - 10}" font-family="serif" font-size="13" fill="#b22222">{label}</text>',
        ]
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
