"""Per-pixel raster operations: medoid compositing, resampling and NDVI."""

from __future__ import annotations

import math

import numpy as np

from ..errors import InputError
from .grid import DEFAULT_NODATA, GridSpec, ImageStack, RasterGrid

# Distance sums within this relative tolerance count as tied.
MEDOID_TIE_RTOL = 1e-12
_MEDOID_CHUNK = 1 << 15


def _medoid_chunk(data: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Index of the medoid epoch per pixel; -1 where nothing is valid.

    data: (T, B, P) float64, valid: (T, P).
    """
    diff = data[:, None, :, :] - data[None, :, :, :]
    dist = np.sqrt(np.einsum("ijbp,ijbp->ijp", diff, diff))
    dist *= valid[None, :, :]
    sums = dist.sum(axis=1)
    sums[~valid] = np.inf
    best = sums.min(axis=0)
    tied = sums <= best + MEDOID_TIE_RTOL * np.abs(best)
    idx = np.argmax(tied, axis=0)
    idx[~np.isfinite(best)] = -1
    return idx


def medoid_composite(observations: np.ndarray, nodata: float | None = DEFAULT_NODATA) -> np.ndarray:
    """Medoid over epochs of a (T, B, rows, cols) array -> (B, rows, cols).

    Per pixel the output is the observed spectral vector with the smallest sum
    of Euclidean distances to the other valid observations of that pixel;
    ties go to the earliest epoch.  An epoch is invalid at a pixel if any band
    is nodata or non-finite; pixels without valid epochs become nodata.
    """
    obs = np.asarray(observations)
    if obs.ndim != 4:
        raise InputError("observations must have shape (epochs, bands, rows, cols)")
    t, b, r, c = obs.shape
    flat = obs.reshape(t, b, r * c)
    bad = ~np.isfinite(flat) if np.issubdtype(flat.dtype, np.floating) else np.zeros(flat.shape, bool)
    if nodata is not None:
        bad |= flat == nodata
    valid = ~bad.any(axis=1)
    out = np.empty((b, r * c), dtype=obs.dtype)
    fill = nodata if nodata is not None else np.nan
    for s in range(0, r * c, _MEDOID_CHUNK):
        e = min(r * c, s + _MEDOID_CHUNK)
        chunk = np.where(valid[:, None, s:e], flat[:, :, s:e], 0).astype(np.float64)
        idx = _medoid_chunk(chunk, valid[:, s:e])
        picked = np.take_along_axis(flat[:, :, s:e], np.maximum(idx, 0)[None, None, :], axis=0)[0]
        picked[:, idx < 0] = fill
        out[:, s:e] = picked
    return out.reshape(b, r, c)


def composite_stacks(epochs: list[ImageStack]) -> ImageStack:
    """Medoid composite of several stacks sharing grid and band names."""
    if not epochs:
        raise InputError("no epochs to composite")
    first = epochs[0]
    for e in epochs[1:]:
        if e.spec != first.spec or e.band_names != first.band_names:
            raise InputError("epochs must share grid and band order")
    arr = np.stack([np.stack([e.bands[n] for n in first.band_names]) for e in epochs])
    comp = medoid_composite(arr, first.nodata)
    return ImageStack(first.spec, {n: comp[i] for i, n in enumerate(first.band_names)}, first.nodata)


def _source_coords(src: GridSpec, target: GridSpec):
    """Target cell centres in fractional source-cell units from the upper-left edge."""
    u = (target.centers_x() - src.origin_x) / src.cell_size
    v = (src.origin_y - target.centers_y()) / src.cell_size
    return u, v


def _bilinear_axis(f: np.ndarray, n: int):
    """Lower neighbour index, upper neighbour index and upper weight along one axis.

    ``f`` is in cell units from the grid edge; cell k has its centre at k + 0.5.
    Positions within half a cell of the border use the edge cell.
    """
    pos = np.clip(f - 0.5, 0.0, max(n - 1, 0))
    i0 = np.minimum(np.floor(pos).astype(np.int64), max(n - 2, 0))
    w1 = pos - i0
    i1 = np.minimum(i0 + 1, n - 1)
    inside = (f >= 0) & (f <= n)
    return i0, i1, w1, inside


def bilinear_resample(src: RasterGrid, target: GridSpec) -> RasterGrid:
    """Bilinear interpolation between the four surrounding source cell centres.

    Target centres outside the source extent, or any neighbour with non-zero
    weight being nodata, give nodata.
    """
    u, v = _source_coords(src.spec, target)
    c0, c1, wx, cin = _bilinear_axis(u, src.spec.ncols)
    r0, r1, wy, rin = _bilinear_axis(v, src.spec.nrows)
    vals = src.values.astype(np.float64)
    ok = src.valid_mask()
    R0, C0 = r0[:, None], c0[None, :]
    R1, C1 = r1[:, None], c1[None, :]
    WX, WY = wx[None, :], wy[:, None]
    out = (
        vals[R0, C0] * (1 - WX) * (1 - WY)
        + vals[R0, C1] * WX * (1 - WY)
        + vals[R1, C0] * (1 - WX) * WY
        + vals[R1, C1] * WX * WY
    )
    bad = (
        (~ok[R0, C0] & ((1 - WX) * (1 - WY) > 0))
        | (~ok[R0, C1] & (WX * (1 - WY) > 0))
        | (~ok[R1, C0] & ((1 - WX) * WY > 0))
        | (~ok[R1, C1] & (WX * WY > 0))
    )
    bad |= ~(rin[:, None] & cin[None, :])
    nodata = src.nodata if src.nodata is not None else DEFAULT_NODATA
    out[bad] = nodata
    if src.values.dtype == np.float32:
        out = out.astype(np.float32)
    return RasterGrid(target, out, nodata)


def _nearest_axis(f: np.ndarray, n: int):
    idx = np.ceil(f).astype(np.int64) - 1
    idx = np.clip(idx, 0, n - 1)
    inside = (f >= 0) & (f <= n)
    return idx, inside


def nearest_resample(src: RasterGrid, target: GridSpec) -> RasterGrid:
    """Value of the nearest source cell centre; equidistant ties go to the lower index."""
    u, v = _source_coords(src.spec, target)
    ci, cin = _nearest_axis(u, src.spec.ncols)
    ri, rin = _nearest_axis(v, src.spec.nrows)
    out = src.values[ri[:, None], ci[None, :]].copy()
    outside = ~(rin[:, None] & cin[None, :])
    nodata = src.nodata if src.nodata is not None else DEFAULT_NODATA
    if outside.any():
        if np.issubdtype(out.dtype, np.integer) and not float(nodata).is_integer():
            out = out.astype(np.float64)
        out[outside] = nodata
    return RasterGrid(target, out, nodata)


def ndvi(nir: RasterGrid, red: RasterGrid) -> RasterGrid:
    """(nir - red) / (nir + red); zero denominators and nodata inputs give nodata."""
    if nir.spec != red.spec:
        raise InputError("NIR and red grids differ")
    a = nir.values.astype(np.float64)
    b = red.values.astype(np.float64)
    ok = nir.valid_mask() & red.valid_mask()
    den = a + b
    ok &= den != 0
    out = np.full(a.shape, nir.nodata if nir.nodata is not None else DEFAULT_NODATA, dtype=np.float64)
    out[ok] = (a[ok] - b[ok]) / den[ok]
    return RasterGrid(nir.spec, out, nir.nodata if nir.nodata is not None else DEFAULT_NODATA)


def target_grid_like(src: GridSpec, cell_size: float) -> GridSpec:
    """Grid with the same extent origin and a new cell size (extent rounded down)."""
    ncols = int(math.floor(src.ncols * src.cell_size / cell_size + 1e-9))
    nrows = int(math.floor(src.nrows * src.cell_size / cell_size + 1e-9))
    return GridSpec(src.origin_x, src.origin_y, cell_size, nrows, ncols)
