"""Direct, model-assisted and poststratified area estimators.

All three estimators share one stratified building block: for a set of
per-plot values z_i in stratum (or group) h with area A_h,

    total_h    = A_h * mean(z)
    variance_h = A_h^2 * S_h^2 / n_h,   S_h^2 = sum((z - mean(z))^2) / (n_h - 1)

and the population figures are sums over h.  For the direct estimator z is
the domain indicator y_i, for the model-assisted variance it is the residual
e_i = y_i - yhat_i, and for poststratification the building block is applied
to each map-defined group inside each design stratum.

Sums are taken with ``math.fsum`` (correctly rounded), so results do not
depend on plot order or on how work is split across threads.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .domains import Domain, SamplePlot, indicator
from .errors import EmptyGroupError, InputError, VarianceUndefinedError

IN_DOMAIN = "in-domain"
OUT_OF_DOMAIN = "out-of-domain"

VARIANCE_OK = "ok"
VARIANCE_PARTIAL = "partial"


@dataclass(frozen=True)
class Stratum:
    stratum_id: int
    area: float
    n_plots: int | None = None
    sampling_weight: float | None = None

    def __post_init__(self):
        if not self.area >= 0:
            raise InputError(f"stratum {self.stratum_id}: area must be >= 0")


@dataclass(frozen=True)
class StratumResult:
    stratum_id: int
    n: int
    total: float
    variance: float | None


@dataclass(frozen=True)
class Estimate:
    """Point estimate (km^2) with its variance (km^4)."""

    domain: Domain
    method: str
    total: float
    variance: float
    correction: float | None = None
    synthetic: float | None = None
    relative_efficiency: float | None = None
    variance_status: str = VARIANCE_OK
    strata: tuple[StratumResult, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("negative variance")

    @property
    def se(self) -> float:
        return math.sqrt(self.variance)

    @property
    def cv(self) -> float | None:
        if self.total > 0:
            return self.se / self.total
        return None

    def with_re(self, re: float | None) -> Estimate:
        return Estimate(
            self.domain, self.method, self.total, self.variance, self.correction,
            self.synthetic, re, self.variance_status, self.strata,
        )


@dataclass(frozen=True)
class PostStratumGroup:
    stratum_id: int
    group_id: str
    mapped_area: float
    plot_ids: tuple[str, ...]

    @property
    def n_plots(self) -> int:
        return len(self.plot_ids)


def _mean_and_s2(values: Sequence[float]) -> tuple[float, float | None]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, None
    s2 = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, s2


def _cell(area: float, values: Sequence[float]) -> tuple[float, float | None]:
    """Total and variance contribution of one stratum or poststratum."""
    mean, s2 = _mean_and_s2(values)
    total = area * mean
    if s2 is None:
        return total, None
    return total, area * area * s2 / len(values)


def _group_by_stratum(plots: Iterable[SamplePlot], strata: Sequence[Stratum]):
    known = {s.stratum_id: s for s in strata}
    if len(known) != len(strata):
        raise InputError("duplicate stratum ids")
    by_stratum: dict[int, list[SamplePlot]] = defaultdict(list)
    for p in plots:
        if p.stratum_id not in known:
            raise InputError(f"plot {p.plot_id} references unknown stratum {p.stratum_id}")
        by_stratum[p.stratum_id].append(p)
    return [(known[h], by_stratum.get(h, [])) for h in sorted(known)]


def _stratified(
    groups: list[tuple[Stratum, list[float]]], require_variance: bool, what: str
) -> tuple[float, float, str, tuple[StratumResult, ...]]:
    totals, variances, results = [], [], []
    status = VARIANCE_OK
    for stratum, values in groups:
        if not values:
            if stratum.area == 0:
                continue
            raise InputError(f"stratum {stratum.stratum_id} has area {stratum.area} but no plots")
        total, var = _cell(stratum.area, values)
        if var is None:
            if require_variance:
                raise VarianceUndefinedError(
                    f"{what}: stratum {stratum.stratum_id} has n=1, variance undefined"
                )
            status = VARIANCE_PARTIAL
        else:
            variances.append(var)
        totals.append(total)
        results.append(StratumResult(stratum.stratum_id, len(values), total, var))
    return math.fsum(totals), math.fsum(variances), status, tuple(results)


def direct_estimate(
    plots: Sequence[SamplePlot],
    strata: Sequence[Stratum],
    target: Domain,
    *,
    require_variance: bool = True,
) -> Estimate:
    """Stratified expansion estimate of the area of ``target``.

    With ``require_variance=False`` singleton strata contribute their total and
    the estimate is flagged ``variance_status="partial"`` instead of raising.
    """
    target = Domain.parse(target)
    grouped = [
        (s, [float(indicator(p.observed, target)) for p in ps])
        for s, ps in _group_by_stratum(plots, strata)
    ]
    total, var, status, per = _stratified(grouped, require_variance, "direct")
    return Estimate(target, "direct", total, var, variance_status=status, strata=per)


def _residuals(plots: Sequence[SamplePlot], target: Domain, exact_mask: bool) -> dict[str, float]:
    out = {}
    for p in plots:
        if exact_mask:
            pred = p.predicted_exact_mask
            if pred is None and p.observed is Domain.NON_FOREST:
                pred = Domain.NON_FOREST
            field_name = "predicted_exact_mask"
        else:
            pred = p.predicted
            field_name = "predicted"
        if pred is None:
            raise InputError(f"plot {p.plot_id} has no {field_name} label")
        out[p.plot_id] = float(indicator(p.observed, target) - indicator(pred, target))
    return out


def model_assisted_estimate(
    plots: Sequence[SamplePlot],
    strata: Sequence[Stratum],
    target: Domain,
    synthetic_area: float,
    *,
    require_variance: bool = True,
) -> Estimate:
    """Synthetic map area plus the design-weighted residual correction."""
    target = Domain.parse(target)
    if not synthetic_area >= 0:
        raise InputError("synthetic area must be >= 0")
    res = _residuals(plots, target, exact_mask=False)
    grouped = _group_by_stratum(plots, strata)
    correction = math.fsum(res[p.plot_id] / p.inclusion_probability for _, ps in grouped for p in ps)
    _, var, status, per = _stratified(
        [(s, [res[p.plot_id] for p in ps]) for s, ps in grouped], require_variance, "model-assisted"
    )
    return Estimate(
        target, "model-assisted", synthetic_area + correction, var,
        correction=correction, synthetic=synthetic_area, variance_status=status, strata=per,
    )


def ma_variance_exact_mask(
    plots: Sequence[SamplePlot],
    strata: Sequence[Stratum],
    target: Domain,
    *,
    require_variance: bool = True,
) -> Estimate:
    """Model-assisted variance obtainable with an error-free forest mask.

    Uses ``predicted_exact_mask``; NFI non-forest plots without that field are
    taken as correctly predicted non-forest.  Only the variance is meaningful,
    ``total`` is reported as NaN.
    """
    target = Domain.parse(target)
    res = _residuals(plots, target, exact_mask=True)
    grouped = _group_by_stratum(plots, strata)
    _, var, status, per = _stratified(
        [(s, [res[p.plot_id] for p in ps]) for s, ps in grouped], require_variance, "exact-mask"
    )
    return Estimate(target, "ma-exact-mask", math.nan, var, variance_status=status, strata=per)


def build_poststrata(
    plots: Sequence[SamplePlot],
    strata: Sequence[Stratum],
    target: Domain,
    mapped_target_area: Mapping[int, float],
) -> dict[int, list[PostStratumGroup]]:
    """Binary map groups per design stratum: predicted ``target`` vs the rest.

    ``mapped_target_area[h]`` is the mapped area of ``target`` inside stratum h.
    """
    target = Domain.parse(target)
    out = {}
    for stratum, ps in _group_by_stratum(plots, strata):
        a_in = float(mapped_target_area.get(stratum.stratum_id, 0.0))
        if a_in < 0 or a_in > stratum.area * (1 + 1e-12):
            raise InputError(
                f"stratum {stratum.stratum_id}: mapped area {a_in} outside [0, {stratum.area}]"
            )
        a_in = min(a_in, stratum.area)
        inside, outside = [], []
        for p in ps:
            if p.predicted is None:
                raise InputError(f"plot {p.plot_id} has no predicted label")
            (inside if indicator(p.predicted, target) else outside).append(p.plot_id)
        out[stratum.stratum_id] = [
            PostStratumGroup(stratum.stratum_id, IN_DOMAIN, a_in, tuple(inside)),
            PostStratumGroup(stratum.stratum_id, OUT_OF_DOMAIN, stratum.area - a_in, tuple(outside)),
        ]
    return out


def poststratified_estimate(
    plots: Sequence[SamplePlot],
    strata: Sequence[Stratum],
    groups: Mapping[int, Sequence[PostStratumGroup]],
    target: Domain,
    *,
    require_variance: bool = True,
) -> Estimate:
    """Stratified estimator over map groups within each design stratum."""
    target = Domain.parse(target)
    totals, variances, per = [], [], []
    status = VARIANCE_OK
    for stratum, ps in _group_by_stratum(plots, strata):
        h = stratum.stratum_id
        stratum_groups = groups.get(h)
        if not stratum_groups:
            if stratum.area == 0 and not ps:
                continue
            raise InputError(f"no poststrata given for stratum {h}")
        y = {p.plot_id: float(indicator(p.observed, target)) for p in ps}
        assigned = [pid for g in stratum_groups for pid in g.plot_ids]
        if len(assigned) != len(set(assigned)) or set(assigned) != set(y):
            raise InputError(f"poststrata of stratum {h} do not partition its plots")
        area_sum = math.fsum(g.mapped_area for g in stratum_groups)
        if not math.isclose(area_sum, stratum.area, rel_tol=1e-9, abs_tol=1e-12):
            raise InputError(f"poststratum areas of stratum {h} sum to {area_sum}, not {stratum.area}")
        g_totals, g_vars = [], []
        stratum_ok = True
        for g in stratum_groups:
            if g.n_plots == 0:
                if g.mapped_area > 0:
                    raise EmptyGroupError(
                        f"stratum {h}, group {g.group_id}: mapped area {g.mapped_area} but no plots"
                    )
                continue
            total, var = _cell(g.mapped_area, [y[pid] for pid in g.plot_ids])
            if var is None:
                if require_variance:
                    raise VarianceUndefinedError(
                        f"poststratified: stratum {h}, group {g.group_id} has n=1"
                    )
                status = VARIANCE_PARTIAL
                stratum_ok = False
            else:
                g_vars.append(var)
            g_totals.append(total)
        t_h, v_h = math.fsum(g_totals), math.fsum(g_vars)
        totals.append(t_h)
        variances.append(v_h)
        per.append(StratumResult(h, len(ps), t_h, v_h if stratum_ok else None))
    return Estimate(
        target, "poststratified", math.fsum(totals), math.fsum(variances),
        variance_status=status, strata=tuple(per),
    )


def relative_efficiency(v_direct: float, v_alt: float) -> float | None:
    """Variance ratio direct / alternative.

    Returns ``math.inf`` when only the alternative variance is zero and
    ``None`` (undefined, reported as "0/0") when both are zero.
    """
    if v_direct < 0 or v_alt < 0:
        raise InputError("variances must be >= 0")
    if v_alt == 0:
        return None if v_direct == 0 else math.inf
    return v_direct / v_alt


def format_re(re: float | None) -> str:
    if re is None:
        return "undefined"
    if math.isinf(re):
        return "inf"
    return repr(float(re))
