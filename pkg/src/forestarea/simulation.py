"""Synthetic landscapes and a Monte Carlo harness for the area estimators.

One landscape is generated from a config and kept fixed; samples are drawn
repeatedly from it, every estimator is applied, and the results are compared
with the census (the true class areas counted on the truth map).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy import ndimage

from .classifier.forest import train
from .domains import CODE_DOMAINS, DOMAIN_CODES, Domain, SamplePlot, target_codes
from .errors import EmptyGroupError, InputError, VarianceUndefinedError
from .estimation import (
    Estimate,
    Stratum,
    build_poststrata,
    direct_estimate,
    model_assisted_estimate,
    poststratified_estimate,
    relative_efficiency,
)
from .raster.grid import GridSpec, ImageStack, RasterGrid
from .raster.mapping import predict_map

# Class order of mixtures and band-mean tables.
MIX_CLASSES = (Domain.SPRUCE, Domain.PINE, Domain.DECIDUOUS, Domain.NON_FOREST, Domain.UNSTOCKED)

DEFAULT_MEANS = {
    Domain.SPRUCE: (20.0, 15.0, 60.0, 30.0),
    Domain.PINE: (22.0, 18.0, 70.0, 35.0),
    Domain.DECIDUOUS: (25.0, 20.0, 90.0, 40.0),
    Domain.NON_FOREST: (60.0, 55.0, 50.0, 70.0),
    Domain.UNSTOCKED: (35.0, 30.0, 55.0, 45.0),
}

MC_DOMAINS = (Domain.SPRUCE, Domain.PINE, Domain.DECIDUOUS, Domain.NON_FOREST, Domain.FOREST_TOTAL)
ESTIMATORS = ("direct", "ma", "ps")
DESIGNS = ("srs", "systematic")
Z95 = 1.96
MIN_REPLICATES = 100


def _check_mixture(mix: Sequence[float], where: str) -> tuple[float, ...]:
    mix = tuple(float(v) for v in mix)
    if len(mix) not in (4, 5):
        raise InputError(f"{where}: mixture needs 4 or 5 fractions (spruce,pine,deciduous,non-forest[,unstocked])")
    if any(not (v >= 0) for v in mix) or not math.isclose(math.fsum(mix), 1.0, abs_tol=1e-9):
        raise InputError(f"{where}: mixture fractions must be >= 0 and sum to 1, got {mix}")
    return mix + (0.0,) * (5 - len(mix))


@dataclass(frozen=True)
class LandscapeConfig:
    """Landscape parameters; strata are horizontal bands of rows, top to bottom."""

    seed: int = 0
    nrows: int = 1000
    ncols: int = 1000
    cell_size: float = 16.0
    stratum_shares: tuple[float, ...] = (0.25, 0.25, 0.25, 0.25)
    mixtures: tuple[tuple[float, ...], ...] = ((0.35, 0.25, 0.15, 0.25),) * 4
    patch_scale: float = 160.0
    noise_sd: float = 8.0
    band_means: dict = field(default_factory=lambda: dict(DEFAULT_MEANS))

    def __post_init__(self):
        if self.nrows < 1 or self.ncols < 1 or not self.cell_size > 0:
            raise InputError("grid dimensions and cell size must be positive")
        if not self.patch_scale >= self.cell_size:
            raise InputError("patch_scale must be >= cell_size")
        if not self.noise_sd >= 0:
            raise InputError("noise_sd must be >= 0")
        shares = tuple(float(s) for s in self.stratum_shares)
        if not shares or any(not s > 0 for s in shares) or not math.isclose(sum(shares), 1.0, abs_tol=1e-9):
            raise InputError("stratum_shares must be positive and sum to 1")
        if len(shares) > self.nrows:
            raise InputError("more strata than rows")
        mixes = tuple(_check_mixture(m, f"stratum {h + 1}") for h, m in enumerate(self.mixtures))
        if len(mixes) == 1:
            mixes = mixes * len(shares)
        if len(mixes) != len(shares):
            raise InputError("need one mixture per stratum (or a single shared one)")
        means = {Domain.parse(k): tuple(float(v) for v in vs) for k, vs in self.band_means.items()}
        nb = {len(v) for v in means.values()}
        if len(nb) != 1 or set(means) < {c for c in MIX_CLASSES if any(m[MIX_CLASSES.index(c)] > 0 for m in mixes)}:
            raise InputError("band means must cover every class in use with equal band counts")
        object.__setattr__(self, "stratum_shares", shares)
        object.__setattr__(self, "mixtures", mixes)
        object.__setattr__(self, "band_means", means)

    @property
    def n_strata(self) -> int:
        return len(self.stratum_shares)

    @property
    def n_bands(self) -> int:
        return len(next(iter(self.band_means.values())))

    def stratum_row_bounds(self) -> list[tuple[int, int]]:
        edges = np.rint(np.cumsum((0.0,) + self.stratum_shares) * self.nrows).astype(int)
        edges[-1] = self.nrows
        if (np.diff(edges) < 1).any():
            raise InputError("a stratum would have no rows")
        return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> LandscapeConfig:
        """Parse ``key = value`` lines; ``#`` starts a comment.

        Keys: seed, nrows, ncols, cell_size, stratum_shares (comma list),
        mixture (shared) or mixture.<h> (1-based), patch_scale, noise_sd,
        means.<class> (comma list of band means).
        """
        kw: dict = {}
        mixes: dict[int, tuple] = {}
        means = dict(DEFAULT_MEANS)
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{source}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            try:
                if key in ("seed", "nrows", "ncols"):
                    kw[key] = int(val)
                elif key in ("cell_size", "patch_scale", "noise_sd"):
                    kw[key] = float(val)
                elif key == "stratum_shares":
                    kw[key] = tuple(float(v) for v in val.split(","))
                elif key == "mixture":
                    mixes[0] = tuple(float(v) for v in val.split(","))
                elif key.startswith("mixture."):
                    mixes[int(key.split(".", 1)[1])] = tuple(float(v) for v in val.split(","))
                elif key.startswith("means."):
                    means[Domain.parse(key.split(".", 1)[1])] = tuple(float(v) for v in val.split(","))
                else:
                    raise InputError(f"unknown key {key!r}")
            except (ValueError, InputError) as e:
                raise InputError(f"{source}:{lineno}: {e}") from None
        n = len(kw.get("stratum_shares", cls.stratum_shares))
        if 0 in mixes:
            kw["mixtures"] = (mixes.pop(0),) * n
        if mixes:
            base = kw.get("mixtures", cls.mixtures if n == 4 else (cls.mixtures[0],) * n)
            kw["mixtures"] = tuple(mixes.get(h + 1, base[h] if h < len(base) else base[0]) for h in range(n))
        elif "mixtures" not in kw and n != 4:
            kw["mixtures"] = (cls.mixtures[0],) * n
        kw["band_means"] = means
        return cls(**kw)

    @classmethod
    def read(cls, path) -> LandscapeConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), str(path))

    def to_text(self) -> str:
        lines = [
            f"seed = {self.seed}",
            f"nrows = {self.nrows}",
            f"ncols = {self.ncols}",
            f"cell_size = {self.cell_size!r}",
            "stratum_shares = " + ",".join(repr(s) for s in self.stratum_shares),
        ]
        lines += [f"mixture.{h + 1} = " + ",".join(repr(v) for v in m) for h, m in enumerate(self.mixtures)]
        lines += [f"patch_scale = {self.patch_scale!r}", f"noise_sd = {self.noise_sd!r}"]
        lines += [f"means.{d.value} = " + ",".join(repr(v) for v in vs) for d, vs in self.band_means.items()]
        return "\n".join(lines) + "\n"


class Landscape(NamedTuple):
    truth: RasterGrid
    features: ImageStack
    strata: RasterGrid


def _smooth_field(rng: np.random.Generator, shape, sigma: float) -> np.ndarray:
    f = rng.standard_normal(shape)
    return ndimage.gaussian_filter(f, sigma, mode="wrap")


def _assign_by_quantile(values: np.ndarray, fractions: Sequence[float], codes: Sequence[int]) -> np.ndarray:
    """Split ``values`` into consecutive rank intervals of the given fractions."""
    n = values.size
    order = np.argsort(values, kind="stable")
    out = np.empty(n, dtype=np.uint8)
    edges = np.rint(np.cumsum((0.0,) + tuple(fractions)) * n).astype(int)
    edges[-1] = n
    for code, a, b in zip(codes, edges[:-1], edges[1:]):
        out[order[a:b]] = code
    return out


def generate_landscape(config: LandscapeConfig) -> Landscape:
    """Truth class map, feature stack and stratum map for ``config``.

    Patches come from two Gaussian-smoothed noise fields (forest vs
    non-forest, then forest type), each thresholded at within-stratum
    quantiles so the realized mixture matches the configured one to within
    rounding.  Features are class band means plus Gaussian noise (float32).
    """
    rng = np.random.default_rng([config.seed, 0])
    shape = (config.nrows, config.ncols)
    sigma = config.patch_scale / config.cell_size
    f_forest = _smooth_field(rng, shape, sigma)
    f_type = _smooth_field(rng, shape, sigma)
    truth = np.zeros(shape, dtype=np.uint8)
    strata = np.zeros(shape, dtype=np.uint8)
    nf = DOMAIN_CODES[Domain.NON_FOREST]
    forest_classes = [c for c in MIX_CLASSES if c is not Domain.NON_FOREST]
    for h, ((r0, r1), mix) in enumerate(zip(config.stratum_row_bounds(), config.mixtures), 1):
        strata[r0:r1] = h
        frac = dict(zip(MIX_CLASSES, mix))
        block = truth[r0:r1].reshape(-1)
        is_forest = _assign_by_quantile(f_forest[r0:r1].ravel(), [frac[Domain.NON_FOREST], 1 - frac[Domain.NON_FOREST]], [0, 1])
        block[is_forest == 0] = nf
        fidx = np.flatnonzero(is_forest)
        f_total = 1 - frac[Domain.NON_FOREST]
        if fidx.size:
            fr = [frac[c] / f_total for c in forest_classes]
            block[fidx] = _assign_by_quantile(
                f_type[r0:r1].ravel()[fidx], fr, [DOMAIN_CODES[c] for c in forest_classes]
            )
        truth[r0:r1] = block.reshape(r1 - r0, config.ncols)
    spec = GridSpec(0.0, config.nrows * config.cell_size, config.cell_size, config.nrows, config.ncols)
    means = np.zeros((256, config.n_bands), dtype=np.float64)
    for d, vs in config.band_means.items():
        if d in DOMAIN_CODES:
            means[DOMAIN_CODES[d]] = vs
    bands = {}
    for b in range(config.n_bands):
        noise = rng.standard_normal(shape, dtype=np.float32) * np.float32(config.noise_sd)
        bands[f"b{b + 1}"] = (means[truth, b].astype(np.float32) + noise).astype(np.float32)
    legend = {c: d for c, d in CODE_DOMAINS.items()}
    return Landscape(
        RasterGrid(spec, truth, 0, legend),
        ImageStack(spec, bands, None),
        RasterGrid(spec, strata, 0, {h: f"stratum-{h}" for h in range(1, config.n_strata + 1)}),
    )


def census_area(truth: RasterGrid, target: Domain, within: np.ndarray | None = None) -> float:
    hit = np.isin(truth.values, target_codes(Domain.parse(target)))
    if within is not None:
        hit &= within
    return int(np.count_nonzero(hit)) * truth.spec.cell_area_km2


def strata_from_map(stratum_map: RasterGrid) -> list[Stratum]:
    ok = stratum_map.valid_mask()
    codes, counts = np.unique(stratum_map.values[ok], return_counts=True)
    return [Stratum(int(h), int(n) * stratum_map.spec.cell_area_km2) for h, n in zip(codes, counts)]


def _sample_cells(stratum_map: RasterGrid, design: str, n_h, rng: np.random.Generator) -> dict[int, np.ndarray]:
    design = design.lower()
    if design not in DESIGNS:
        raise InputError(f"unknown design {design!r}; use one of {DESIGNS}")
    vals = stratum_map.values
    ok = stratum_map.valid_mask()
    nrows, ncols = vals.shape
    out = {}
    for s in strata_from_map(stratum_map):
        h = s.stratum_id
        n = int(n_h[h] if isinstance(n_h, dict) else n_h)
        cells = np.flatnonzero(ok & (vals == h))
        if n < 2:
            raise InputError(f"stratum {h}: need at least 2 plots, got {n}")
        if n > cells.size:
            raise InputError(f"stratum {h}: {n} plots requested but only {cells.size} cells")
        if design == "srs":
            out[h] = np.sort(rng.choice(cells, size=n, replace=False))
        else:
            step = math.sqrt(cells.size / n)
            oy, ox = rng.uniform(0, step, 2)
            rows = np.floor(oy + step * np.arange(math.ceil(nrows / step) + 1)).astype(np.int64)
            cols = np.floor(ox + step * np.arange(math.ceil(ncols / step) + 1)).astype(np.int64)
            rows, cols = rows[rows < nrows], cols[cols < ncols]
            flat = (rows[:, None] * ncols + cols[None, :]).ravel()
            flat = flat[vals.ravel()[flat] == h]
            flat = flat[ok.ravel()[flat]]
            if flat.size < 2:
                raise InputError(f"stratum {h}: systematic grid hit fewer than 2 cells")
            out[h] = np.sort(flat)
    return out


def draw_sample(
    truth: RasterGrid,
    stratum_map: RasterGrid,
    design: str,
    n_h,
    seed,
    prediction_map: RasterGrid | None = None,
) -> list[SamplePlot]:
    """Stratified sample of cells labelled from ``truth``.

    ``design`` is ``srs`` (simple random without replacement) or
    ``systematic`` (square grid with spacing sqrt(N_h / n_h) cells and a
    seeded random offset, so the realized count varies around n_h).
    pi_i = realized n_h / A_h.  ``n_h`` is an int or a {stratum: int} dict.
    """
    if truth.spec != stratum_map.spec:
        raise InputError("truth and stratum maps differ in grid")
    if prediction_map is not None and prediction_map.spec != truth.spec:
        raise InputError("prediction map differs in grid")
    rng = np.random.default_rng(seed)
    areas = {s.stratum_id: s.area for s in strata_from_map(stratum_map)}
    spec = truth.spec
    tv = truth.values.ravel()
    pv = None if prediction_map is None else prediction_map.values.ravel()
    plots = []
    for h, cells in _sample_cells(stratum_map, design, n_h, rng).items():
        pi = cells.size / areas[h]
        r, c = np.divmod(cells, spec.ncols)
        xs = spec.origin_x + (c + 0.5) * spec.cell_size
        ys = spec.origin_y - (r + 0.5) * spec.cell_size
        for k in range(cells.size):
            code = int(tv[cells[k]])
            if code not in CODE_DOMAINS:
                raise InputError(f"truth map has nodata at sampled cell ({r[k]}, {c[k]})")
            pred = None if pv is None else CODE_DOMAINS.get(int(pv[cells[k]]))
            plots.append(
                SamplePlot(f"s{h}-{int(cells[k])}", h, float(xs[k]), float(ys[k]), CODE_DOMAINS[code], pi, pred)
            )
    return plots


# -- injected classifiers ----------------------------------------------------

def classify_landscape(landscape: Landscape, spec: str, seed: int = 0) -> RasterGrid:
    """Prediction map from a classifier description.

    ``perfect``           truth copied
    ``random``            labels drawn independently of truth with the census class frequencies
    ``noisy:<acc>``       truth kept with probability acc, else a uniformly drawn other class
    ``rf[:ntrees[:pilot]]`` random forest trained on an independent SRS pilot of cells
    """
    truth = landscape.truth
    kind, _, arg = spec.partition(":")
    kind = kind.strip().lower()
    rng = np.random.default_rng([seed, 1])
    codes = np.array(sorted(int(c) for c in np.unique(truth.values) if int(c) in CODE_DOMAINS), dtype=np.uint8)
    legend = dict(truth.legend or {})
    if kind == "perfect":
        return RasterGrid(truth.spec, truth.values.copy(), truth.nodata, legend)
    if kind == "random":
        counts = np.array([(truth.values == c).sum() for c in codes], dtype=np.float64)
        out = rng.choice(codes, size=truth.values.shape, p=counts / counts.sum()).astype(np.uint8)
        return RasterGrid(truth.spec, out, truth.nodata, legend)
    if kind == "noisy":
        try:
            acc = float(arg)
        except ValueError:
            raise InputError(f"classifier {spec!r}: expected noisy:<accuracy>") from None
        if not 0 <= acc <= 1:
            raise InputError("noisy accuracy must be in [0, 1]")
        all_codes = np.array(sorted(DOMAIN_CODES[d] for d in MIX_CLASSES[:4]), dtype=np.uint8)
        wrong = rng.random(truth.values.shape) >= acc
        shift = rng.integers(1, all_codes.size, size=truth.values.shape)
        idx = np.searchsorted(all_codes, truth.values)
        other = all_codes[(idx + shift) % all_codes.size]
        out = np.where(wrong, other, truth.values).astype(np.uint8)
        return RasterGrid(truth.spec, out, truth.nodata, legend)
    if kind == "rf":
        parts = [p for p in arg.split(":") if p] if arg else []
        ntrees = int(parts[0]) if parts else 100
        pilot = int(parts[1]) if len(parts) > 1 else 1000
        cells = rng.choice(truth.values.size, size=min(pilot, truth.values.size), replace=False)
        stack = landscape.features
        X = np.stack([stack.bands[b].ravel()[cells] for b in stack.band_names], axis=1).astype(np.float64)
        y = [CODE_DOMAINS[int(v)] for v in truth.values.ravel()[cells]]
        forest = train(X, y, ntrees=ntrees, seed=seed, feature_names=stack.band_names,
                       class_labels=[d for d in MIX_CLASSES if d in set(y)])
        mask = RasterGrid(truth.spec, np.ones(truth.values.shape, np.uint8), None)
        return predict_map(stack, mask, forest)
    raise InputError(f"unknown classifier {spec!r}")


# -- Monte Carlo ---------------------------------------------------------------

@dataclass(frozen=True)
class McRow:
    estimator: str
    domain: Domain
    census: float
    replicates: int
    used: int
    skipped: int
    mean: float
    bias: float
    mc_se: float
    empirical_variance: float
    mean_estimated_variance: float
    variance_ratio: float
    coverage: float
    mean_re: float | None


@dataclass(frozen=True)
class McReport:
    replicates: int
    design: str
    classifier: str
    rows: tuple[McRow, ...]
    map_accuracy: float

    def row(self, estimator: str, domain) -> McRow:
        d = Domain.parse(domain)
        for r in self.rows:
            if r.estimator == estimator and r.domain is d:
                return r
        raise KeyError((estimator, d))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["estimator", "domain", "census_km2", "replicates", "used", "skipped", "mean_km2", "bias_km2",
                    "mc_se_km2", "empirical_variance", "mean_estimated_variance", "variance_ratio", "coverage",
                    "mean_re"])
        for r in self.rows:
            w.writerow([r.estimator, r.domain.value, repr(r.census), r.replicates, r.used, r.skipped, repr(r.mean),
                        repr(r.bias), repr(r.mc_se), repr(r.empirical_variance), repr(r.mean_estimated_variance),
                        repr(r.variance_ratio), repr(r.coverage), "" if r.mean_re is None else repr(r.mean_re)])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [
            f"Monte Carlo: R={self.replicates}, design={self.design}, classifier={self.classifier}, "
            f"map OA={100 * self.map_accuracy:.1f}%",
            f"{'estimator':<10}{'domain':<14}{'census':>11}{'bias/MCSE':>11}{'var ratio':>11}{'coverage':>10}"
            f"{'mean RE':>9}{'skipped':>9}",
        ]
        for r in self.rows:
            z = r.bias / r.mc_se if r.mc_se > 0 else (0.0 if r.bias == 0 else math.inf)
            re = "-" if r.mean_re is None else ("inf" if math.isinf(r.mean_re) else f"{r.mean_re:.3f}")
            ratio = "n/a" if math.isnan(r.variance_ratio) else f"{r.variance_ratio:.3f}"
            lines.append(
                f"{r.estimator:<10}{r.domain.value:<14}{r.census:>11.3f}{z:>11.2f}{ratio:>11}"
                f"{100 * r.coverage:>9.1f}%{re:>9}{r.skipped:>9}"
            )
        return "\n".join(lines) + "\n"


def _one_replicate(landscape, pred_map, strata, design, n_h, seed, r, estimators, domains, synth, mapped):
    plots = draw_sample(landscape.truth, landscape.strata, design, n_h, [seed, r], pred_map)
    out = {}
    for d in domains:
        direct = direct_estimate(plots, strata, d)
        for est in estimators:
            try:
                if est == "direct":
                    e = direct
                elif est == "ma":
                    e = model_assisted_estimate(plots, strata, d, synth[d])
                else:
                    groups = build_poststrata(plots, strata, d, mapped[d])
                    e = poststratified_estimate(plots, strata, groups, d)
            except (EmptyGroupError, VarianceUndefinedError):
                out[(est, d)] = None
                continue
            out[(est, d)] = (e.total, e.variance, relative_efficiency(direct.variance, e.variance))
    return out


def monte_carlo(
    config: LandscapeConfig,
    estimators: Sequence[str] = ESTIMATORS,
    R: int = 1000,
    seed: int = 0,
    *,
    classifier: str = "noisy:0.8",
    design: str = "srs",
    n_h=50,
    domains: Sequence = MC_DOMAINS,
    n_jobs: int = 1,
    landscape: Landscape | None = None,
    prediction_map: RasterGrid | None = None,
) -> McReport:
    """Repeated sampling from one fixed landscape.

    Replicate r uses the seed sequence [seed, r], so the report does not
    depend on ``n_jobs``.  A replicate where an estimator is inapplicable
    (empty or singleton map group) counts as skipped for that estimator.
    Mean RE averages V_direct / V_alt over replicates where it is defined;
    it is ``inf`` when any replicate has zero alternative variance.
    """
    if R < MIN_REPLICATES:
        raise InputError(f"need at least {MIN_REPLICATES} replicates, got {R}")
    estimators = tuple(e.lower() for e in estimators)
    for e in estimators:
        if e not in ESTIMATORS:
            raise InputError(f"unknown estimator {e!r}")
    domains = tuple(Domain.parse(d) for d in domains)
    land = landscape if landscape is not None else generate_landscape(config)
    pred = prediction_map if prediction_map is not None else classify_landscape(land, classifier, config.seed)
    strata = strata_from_map(land.strata)
    smap = land.strata.values
    synth = {d: census_area(pred, d) for d in domains}
    mapped = {d: {s.stratum_id: census_area(pred, d, smap == s.stratum_id) for s in strata} for d in domains}
    census = {d: census_area(land.truth, d) for d in domains}
    accuracy = float(np.mean(pred.values == land.truth.values))

    def run(r):
        return _one_replicate(land, pred, strata, design, n_h, seed, r, estimators, domains, synth, mapped)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            results = list(ex.map(run, range(R)))
    else:
        results = [run(r) for r in range(R)]

    rows = []
    for est in estimators:
        for d in domains:
            vals = [res[(est, d)] for res in results if res[(est, d)] is not None]
            used = len(vals)
            if used < 2:
                rows.append(McRow(est, d, census[d], R, used, R - used, math.nan, math.nan, math.nan, math.nan,
                                  math.nan, math.nan, math.nan, None))
                continue
            t = np.array([v[0] for v in vals])
            v = np.array([v[1] for v in vals])
            mean = math.fsum(t) / used
            emp_var = math.fsum((t - mean) ** 2) / (used - 1)
            mean_var = math.fsum(v) / used
            ratio = mean_var / emp_var if emp_var > 0 else (1.0 if mean_var == 0 else math.inf)
            cover = float(np.mean(np.abs(t - census[d]) <= Z95 * np.sqrt(v) + 1e-9 * max(1.0, census[d])))
            res_ = [x[2] for x in vals if x[2] is not None]
            mean_re = None
            if res_:
                mean_re = math.inf if any(math.isinf(x) for x in res_) else math.fsum(res_) / len(res_)
            rows.append(McRow(est, d, census[d], R, used, R - used, mean, mean - census[d],
                              math.sqrt(emp_var / used), emp_var, mean_var, ratio, cover, mean_re))
    return McReport(R, design, classifier, tuple(rows), accuracy)


def with_seed(config: LandscapeConfig, seed: int) -> LandscapeConfig:
    return replace(config, seed=seed)
