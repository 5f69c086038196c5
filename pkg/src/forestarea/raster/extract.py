"""Area-weighted predictor extraction for circular sample plots."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from .grid import ImageStack

PLOT_RADIUS_M = 8.92  # 250 m^2 circle
FALLBACK_RADIUS_M = 18.0
SUBCELLS = 16


@dataclass(frozen=True)
class PlotExtraction:
    values: np.ndarray
    radius_used: float
    missing: bool


def circle_cell_weights(spec, x: float, y: float, radius: float, subcells: int = SUBCELLS):
    """Rows, columns and overlap areas (m^2) of cells intersecting a circle.

    Overlap is estimated by counting which of ``subcells x subcells`` cell
    midpoints fall inside the circle.
    """
    cs = spec.cell_size
    c_lo = max(0, int(math.floor((x - radius - spec.origin_x) / cs)))
    c_hi = min(spec.ncols - 1, int(math.floor((x + radius - spec.origin_x) / cs)))
    r_lo = max(0, int(math.floor((spec.origin_y - (y + radius)) / cs)))
    r_hi = min(spec.nrows - 1, int(math.floor((spec.origin_y - (y - radius)) / cs)))
    if c_hi < c_lo or r_hi < r_lo:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
    offs = (np.arange(subcells) + 0.5) / subcells * cs
    rows, cols, areas = [], [], []
    r2 = radius * radius
    for r in range(r_lo, r_hi + 1):
        sy = spec.origin_y - r * cs - offs
        dy2 = (sy - y) ** 2
        for c in range(c_lo, c_hi + 1):
            sx = spec.origin_x + c * cs + offs
            inside = ((sx[None, :] - x) ** 2 + dy2[:, None]) <= r2
            n = int(inside.sum())
            if n:
                rows.append(r)
                cols.append(c)
                areas.append(n * cs * cs / (subcells * subcells))
    return np.array(rows, np.int64), np.array(cols, np.int64), np.array(areas)


def _weighted_means(stack: ImageStack, rows, cols, areas) -> np.ndarray:
    out = np.full(len(stack.bands), np.nan)
    for j, arr in enumerate(stack.bands.values()):
        vals = arr[rows, cols].astype(np.float64)
        ok = np.isfinite(vals)
        if stack.nodata is not None:
            ok &= vals != stack.nodata
        w = areas[ok]
        if w.sum() > 0:
            out[j] = float(np.dot(w, vals[ok]) / w.sum())
    return out


def extract_plot_predictors(
    stack: ImageStack,
    x: float,
    y: float,
    radius: float = PLOT_RADIUS_M,
    fallback_radius: float = FALLBACK_RADIUS_M,
) -> PlotExtraction:
    """Overlap-weighted band means over a circular plot.

    If some band has no valid pixel inside the circle the extraction is
    repeated once with ``fallback_radius``; bands still empty are NaN and the
    result is flagged ``missing``.
    """
    if not stack.spec.contains(x, y):
        raise InputError(f"plot centre ({x}, {y}) outside stack extent")
    vals = _weighted_means(stack, *circle_cell_weights(stack.spec, x, y, radius))
    used = radius
    if np.isnan(vals).any() and fallback_radius > radius:
        vals = _weighted_means(stack, *circle_cell_weights(stack.spec, x, y, fallback_radius))
        used = fallback_radius
    return PlotExtraction(vals, used, bool(np.isnan(vals).any()))
