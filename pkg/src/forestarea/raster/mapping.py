"""Wall-to-wall class mapping and map-based (synthetic) areas."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..classifier.forest import Forest
from ..domains import CODE_DOMAINS, DOMAIN_CODES, MAP_NODATA, Domain, target_codes
from ..errors import InputError
from .grid import ImageStack, RasterGrid

DEFAULT_TILE = 256


def _label_codes(forest: Forest) -> np.ndarray:
    return np.array([DOMAIN_CODES[Domain.parse(c)] for c in forest.class_labels], dtype=np.uint8)


def _layer(name, stack: ImageStack, extra: Mapping[str, RasterGrid]):
    if name in stack.bands:
        return stack.bands[name], stack.nodata
    if name in extra:
        g = extra[name]
        if g.spec != stack.spec:
            raise InputError(f"extra layer {name!r} is not on the stack grid")
        return g.values, g.nodata
    raise InputError(f"feature layer {name!r} missing from stack and extra layers")


def predict_map(
    stack: ImageStack,
    forest_mask: RasterGrid,
    forest: Forest,
    extra_layers: Mapping[str, RasterGrid] | None = None,
    tile_size: int = DEFAULT_TILE,
) -> RasterGrid:
    """Classify every forest-mask cell with ``forest``.

    Mask semantics: nodata -> nodata, 0 -> non-forest, any other code ->
    forest.  Forest cells with a missing feature value are mapped as
    non-forest.  The output uses the domain codes with 0 as nodata and does
    not depend on ``tile_size``.
    """
    extra = dict(extra_layers or {})
    if forest_mask.spec != stack.spec:
        raise InputError("forest mask is not on the stack grid")
    layers = [_layer(n, stack, extra) for n in forest.feature_names]
    codes = _label_codes(forest)
    nrows, ncols = stack.spec.shape
    out = np.full((nrows, ncols), MAP_NODATA, dtype=np.uint8)
    mask_ok = forest_mask.valid_mask()
    non_forest = DOMAIN_CODES[Domain.NON_FOREST]
    p = len(layers)
    # float32 is exact for float32 layers and small integers; otherwise keep float64
    exact32 = all(
        a.dtype == np.float32 or (np.issubdtype(a.dtype, np.integer) and a.dtype.itemsize <= 2)
        for a, _ in layers
    )
    dtype = np.float32 if exact32 else np.float64
    for r0 in range(0, nrows, tile_size):
        r1 = min(nrows, r0 + tile_size)
        for c0 in range(0, ncols, tile_size):
            c1 = min(ncols, c0 + tile_size)
            m_ok = mask_ok[r0:r1, c0:c1]
            is_forest = m_ok & (forest_mask.values[r0:r1, c0:c1] != 0)
            tile = out[r0:r1, c0:c1]
            tile[m_ok] = non_forest
            feat_ok = is_forest.copy()
            for arr, nd in layers:
                a = arr[r0:r1, c0:c1]
                if np.issubdtype(a.dtype, np.floating):
                    feat_ok &= np.isfinite(a)
                if nd is not None:
                    feat_ok &= a != nd
            n = int(feat_ok.sum())
            if n == 0:
                continue
            XT = np.empty((p, n), dtype=dtype)
            for j, (arr, _) in enumerate(layers):
                XT[j] = arr[r0:r1, c0:c1][feat_ok]
            tile[feat_ok] = codes[forest.predict_index_bandmajor(XT)]
    legend = {code: d for code, d in CODE_DOMAINS.items()}
    return RasterGrid(stack.spec, out, MAP_NODATA, legend)


def synthetic_area(class_map: RasterGrid, target: Domain, within=None) -> float:
    """Summed cell area (km^2) of ``target`` cells, optionally within a boolean mask."""
    target = Domain.parse(target)
    hit = np.isin(class_map.values, target_codes(target))
    if within is not None:
        hit &= within
    return int(np.count_nonzero(hit)) * class_map.spec.cell_area_km2


def class_areas(class_map: RasterGrid) -> dict:
    """Area (km^2) per map code, including the nodata code."""
    codes, counts = np.unique(class_map.values, return_counts=True)
    return {int(c): int(n) * class_map.spec.cell_area_km2 for c, n in zip(codes, counts)}


def mapped_area_by_stratum(class_map: RasterGrid, stratum_map: RasterGrid, target: Domain) -> dict[int, float]:
    """Mapped area (km^2) of ``target`` inside each stratum code of ``stratum_map``."""
    if class_map.spec != stratum_map.spec:
        raise InputError("class map and stratum map grids differ")
    ok = stratum_map.valid_mask()
    hit = np.isin(class_map.values, target_codes(Domain.parse(target))) & ok
    strata = np.unique(stratum_map.values[ok])
    return {
        int(h): int(np.count_nonzero(hit & (stratum_map.values == h))) * class_map.spec.cell_area_km2
        for h in strata
    }
