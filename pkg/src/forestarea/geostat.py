"""Spherical variogram and universal kriging for the stratum map."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .domains import MAP_NODATA
from .errors import InputError, NumericError
from .raster.grid import DEFAULT_NODATA, GridSpec, RasterGrid

ELEVATION_EPS = 1e-6


@dataclass(frozen=True)
class VariogramModel:
    nugget: float = 0.0
    sill: float = 0.73
    range_m: float = 5600.0

    def __post_init__(self):
        if self.nugget < 0 or not self.sill > self.nugget or not self.range_m > 0:
            raise InputError("need nugget >= 0, sill > nugget, range > 0")


STRATUM_VARIOGRAM = VariogramModel(0.0, 0.73, 5600.0)


def spherical_gamma(h, model: VariogramModel = STRATUM_VARIOGRAM):
    """Semivariance at lag ``h`` (metres); scalar or array."""
    h_arr = np.asarray(h, dtype=np.float64)
    if (h_arr < 0).any():
        raise InputError("lag distance must be >= 0")
    r = h_arr / model.range_m
    partial = model.sill - model.nugget
    g = np.where(r < 1.0, model.nugget + partial * (1.5 * r - 0.5 * r**3), model.sill)
    g = np.where(h_arr == 0, model.nugget, g)
    return float(g) if np.ndim(h) == 0 else g


def logit_elevation(elevation, e_max: float):
    """logit(e / (e_max + 1)), with the ratio clamped to [1e-6, 1 - 1e-6]."""
    q = np.clip(np.asarray(elevation, dtype=np.float64) / (e_max + 1.0), ELEVATION_EPS, 1 - ELEVATION_EPS)
    return np.log(q / (1 - q))


@dataclass(frozen=True)
class KrigingObservation:
    x: float
    y: float
    response: float
    covariate: float


class UniversalKriging:
    """Universal kriging with drift basis {1, covariate}.

    The (n+2)x(n+2) system in semivariance form is factorized once::

        | G   F | |w  |   |g0|
        | F^T 0 | |mu | = |f0|

    where G holds gamma between observations, F = [1, covariate] and the
    right-hand side holds gamma to the target and the target's drift.
    """

    def __init__(self, observations: Sequence[KrigingObservation], model: VariogramModel = STRATUM_VARIOGRAM):
        obs = list(observations)
        if len(obs) < 3:
            raise InputError("universal kriging needs at least 3 observations")
        xy = np.array([(o.x, o.y) for o in obs], dtype=np.float64)
        z = np.array([o.response for o in obs], dtype=np.float64)
        cov = np.array([o.covariate for o in obs], dtype=np.float64)
        if not (np.isfinite(xy).all() and np.isfinite(z).all() and np.isfinite(cov).all()):
            raise InputError("observations must be finite")
        _, first, inverse = np.unique(xy, axis=0, return_index=True, return_inverse=True)
        if len(first) < len(obs):
            inverse = inverse.ravel()
            for k in range(len(first)):
                members = np.flatnonzero(inverse == k)
                if len(members) > 1 and (np.ptp(z[members]) > 0 or np.ptp(cov[members]) > 0):
                    i, j = members[:2]
                    raise NumericError(
                        f"duplicate location ({xy[i, 0]}, {xy[i, 1]}) with conflicting observations {i} and {j}"
                    )
            keep = np.sort(first)
            xy, z, cov = xy[keep], z[keep], cov[keep]
        if np.ptp(cov) == 0:
            raise NumericError("covariate is constant: drift columns are collinear")
        if np.linalg.matrix_rank(np.c_[np.ones(len(xy)), xy]) < 3:
            raise NumericError("observation locations are collinear")
        self.model = model
        self.xy, self.z, self.cov = xy, z, cov
        n = len(z)
        d = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
        a = np.zeros((n + 2, n + 2))
        a[:n, :n] = spherical_gamma(d, model)
        a[:n, n] = a[n, :n] = 1.0
        a[:n, n + 1] = a[n + 1, :n] = cov
        self.system = a
        cond = np.linalg.cond(a)
        if not np.isfinite(cond) or cond > 1e14:
            raise NumericError(f"kriging system is singular (condition number {cond:.3g})")
        self._lu = scipy.linalg.lu_factor(a)

    @property
    def n(self) -> int:
        return len(self.z)

    def _rhs(self, x, y, covariate) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        c = np.atleast_1d(np.asarray(covariate, dtype=np.float64))
        d = np.hypot(self.xy[:, 0, None] - x[None, :], self.xy[:, 1, None] - y[None, :])
        b = np.empty((self.n + 2, x.size))
        b[: self.n] = spherical_gamma(d, self.model)
        b[self.n] = 1.0
        b[self.n + 1] = c
        return b

    def weights(self, x, y, covariate) -> np.ndarray:
        """Kriging weights, shape (n_obs, n_targets)."""
        sol = scipy.linalg.lu_solve(self._lu, self._rhs(x, y, covariate))
        return sol[: self.n]

    def predict(self, x, y, covariate, chunk: int = 65536) -> np.ndarray:
        x = np.ravel(np.asarray(x, dtype=np.float64))
        y = np.ravel(np.asarray(y, dtype=np.float64))
        c = np.ravel(np.asarray(covariate, dtype=np.float64))
        out = np.empty(x.size)
        for s in range(0, x.size, chunk):
            e = min(x.size, s + chunk)
            out[s:e] = self.z @ self.weights(x[s:e], y[s:e], c[s:e])
        return out


def universal_kriging_predict(
    observations: Sequence[KrigingObservation],
    model: VariogramModel,
    target: GridSpec,
    covariate: np.ndarray,
    covariate_nodata: float | None = None,
) -> RasterGrid:
    """Kriged surface on the centres of ``target``; ``covariate`` is a (rows, cols) array."""
    covariate = np.asarray(covariate, dtype=np.float64)
    if covariate.shape != target.shape:
        raise InputError("covariate grid does not match target grid")
    uk = UniversalKriging(observations, model)
    xs, ys = np.meshgrid(target.centers_x(), target.centers_y())
    ok = np.isfinite(covariate)
    if covariate_nodata is not None:
        ok &= covariate != covariate_nodata
    out = np.full(target.shape, DEFAULT_NODATA)
    out[ok] = uk.predict(xs[ok], ys[ok], covariate[ok])
    return RasterGrid(target, out, DEFAULT_NODATA)


def threshold_to_stratum(predicted: RasterGrid, cut: float = 0.5) -> RasterGrid:
    """Stratum 2 (mountain) where the surface is >= ``cut``, else stratum 1; nodata -> 0."""
    ok = predicted.valid_mask()
    out = np.full(predicted.spec.shape, MAP_NODATA, dtype=np.uint8)
    out[ok & (predicted.values >= cut)] = 2
    out[ok & (predicted.values < cut)] = 1
    return RasterGrid(predicted.spec, out, MAP_NODATA, {1: "stratum-1", 2: "stratum-2"})


def read_observations_csv(path) -> list[KrigingObservation]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"x", "y", "response", "covariate"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise InputError(f"{path}: header must contain {sorted(need)}")
        for lineno, row in enumerate(reader, 2):
            try:
                out.append(
                    KrigingObservation(float(row["x"]), float(row["y"]), float(row["response"]), float(row["covariate"]))
                )
            except ValueError as e:
                raise InputError(f"{path}:{lineno}: {e}") from None
            if not all(math.isfinite(v) for v in (out[-1].x, out[-1].y, out[-1].response, out[-1].covariate)):
                raise InputError(f"{path}:{lineno}: non-finite value")
    return out
