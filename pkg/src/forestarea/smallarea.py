"""Estimators restricted to sub-populations (e.g. municipalities).

A sub-population carries its own area in every design stratum and the
mapped area of each domain there; its plots are the NFI plots located
inside it.  Model-assisted estimation in a stratum needs at least 30 plots
(forest and non-forest together); poststratification additionally needs at
least 20 plots in each of the two map groups.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .domains import Domain, SamplePlot, indicator
from .errors import InputError
from .estimation import (
    Estimate,
    Stratum,
    build_poststrata,
    direct_estimate,
    model_assisted_estimate,
    poststratified_estimate,
    relative_efficiency,
)

MA_MIN_PLOTS = 30
PS_MIN_GROUP_PLOTS = 20

METHODS = ("direct", "ma", "ps")

STATUS_OK = "ok"
STATUS_PARTIAL = "partial"
STATUS_INAPPLICABLE = "inapplicable"


@dataclass(frozen=True)
class SubPopulation:
    subpop_id: str
    stratum_areas: Mapping[int, float]
    plot_ids: frozenset[str]
    mapped_areas: Mapping[int, Mapping[Domain, float]] = field(default_factory=dict)

    def mapped_area(self, h: int, target: Domain) -> float:
        areas = self.mapped_areas.get(h, {})
        if target is Domain.FOREST_TOTAL and Domain.FOREST_TOTAL not in areas:
            return math.fsum(v for d, v in areas.items() if indicator(d, Domain.FOREST_TOTAL))
        return float(areas.get(target, 0.0))

    def strata(self) -> list[Stratum]:
        return [Stratum(h, float(a)) for h, a in sorted(self.stratum_areas.items())]


@dataclass(frozen=True)
class GateVerdict:
    method: str
    target: Domain
    per_stratum: Mapping[int, bool]
    reasons: Mapping[int, str]

    @property
    def overall(self) -> bool:
        return bool(self.per_stratum) and all(self.per_stratum.values())

    @property
    def any_pass(self) -> bool:
        return any(self.per_stratum.values())

    def passing(self) -> list[int]:
        return sorted(h for h, ok in self.per_stratum.items() if ok)


def _member_plots(subpop: SubPopulation, plots: Sequence[SamplePlot]) -> list[SamplePlot]:
    return [p for p in plots if p.plot_id in subpop.plot_ids]


def gate_check(
    subpop: SubPopulation, plots: Sequence[SamplePlot], method: str, target: Domain
) -> GateVerdict:
    """Per-stratum applicability of MA or PS in ``subpop``."""
    method = method.lower()
    if method not in ("ma", "ps"):
        raise InputError(f"gates exist for 'ma' and 'ps', not {method!r}")
    target = Domain.parse(target)
    members = _member_plots(subpop, plots)
    per, why = {}, {}
    for h in sorted(subpop.stratum_areas):
        ps = [p for p in members if p.stratum_id == h]
        n = len(ps)
        ok = n >= MA_MIN_PLOTS
        reason = f"n={n}" + ("" if ok else f" < {MA_MIN_PLOTS}")
        if ok and method == "ps":
            n_in = sum(1 for p in ps if p.predicted is not None and indicator(p.predicted, target))
            n_out = n - n_in
            ok = n_in >= PS_MIN_GROUP_PLOTS and n_out >= PS_MIN_GROUP_PLOTS
            reason += f", groups in={n_in} out={n_out}" + ("" if ok else f" (need >= {PS_MIN_GROUP_PLOTS} each)")
        per[h] = ok
        why[h] = reason
    return GateVerdict(method, target, per, why)


@dataclass(frozen=True)
class SubpopResult:
    subpop_id: str
    method: str
    target: Domain
    status: str
    verdict: GateVerdict | None
    estimate: Estimate | None
    direct: Estimate | None
    per_stratum: Mapping[int, Estimate]
    strata_used: tuple[int, ...]


def _estimate(method, plots, strata, target, subpop):
    if method == "direct":
        return direct_estimate(plots, strata, target)
    if method == "ma":
        synth = math.fsum(subpop.mapped_area(s.stratum_id, target) for s in strata)
        return model_assisted_estimate(plots, strata, target, synth)
    groups = build_poststrata(
        plots, strata, target, {s.stratum_id: subpop.mapped_area(s.stratum_id, target) for s in strata}
    )
    return poststratified_estimate(plots, strata, groups, target)


def _with_re(est: Estimate, direct: Estimate) -> Estimate:
    return est.with_re(relative_efficiency(direct.variance, est.variance))


def estimate_subpop(
    subpop: SubPopulation,
    plots: Sequence[SamplePlot],
    method: str,
    target: Domain,
) -> SubpopResult:
    """Apply one estimator inside ``subpop`` subject to the gates.

    If only some strata pass, per-stratum results are returned together with
    an aggregate over the passing strata flagged ``partial``; if none pass the
    result is ``inapplicable`` and carries no numbers.  RE is relative to the
    direct estimate over the same strata.
    """
    method = method.lower()
    if method not in METHODS:
        raise InputError(f"unknown method {method!r}")
    target = Domain.parse(target)
    members = _member_plots(subpop, plots)
    strata = subpop.strata()
    if method == "direct":
        # strata without at least two member plots cannot be estimated
        counts = {s.stratum_id: sum(1 for p in members if p.stratum_id == s.stratum_id) for s in strata}
        used = tuple(h for h, n in sorted(counts.items()) if n >= 2)
        if not used:
            return SubpopResult(subpop.subpop_id, method, target, STATUS_INAPPLICABLE, None, None, None, {}, ())
        s_used = [s for s in strata if s.stratum_id in used]
        est = direct_estimate([p for p in members if p.stratum_id in used], s_used, target)
        skipped = [s for s in strata if s.stratum_id not in used and s.area > 0]
        status = STATUS_PARTIAL if skipped else STATUS_OK
        return SubpopResult(subpop.subpop_id, method, target, status, None, est, est, {}, used)

    verdict = gate_check(subpop, plots, method, target)
    if not verdict.any_pass:
        return SubpopResult(subpop.subpop_id, method, target, STATUS_INAPPLICABLE, verdict, None, None, {}, ())
    per = {}
    for h in verdict.passing():
        s = [st for st in strata if st.stratum_id == h]
        ps = [p for p in members if p.stratum_id == h]
        d = direct_estimate(ps, s, target)
        per[h] = _with_re(_estimate(method, ps, s, target, subpop), d)
    used = verdict.passing()
    s_used = [st for st in strata if st.stratum_id in used]
    p_used = [p for p in members if p.stratum_id in used]
    direct = direct_estimate(p_used, s_used, target)
    est = _with_re(_estimate(method, p_used, s_used, target, subpop), direct)
    status = STATUS_OK if verdict.overall else STATUS_PARTIAL
    return SubpopResult(subpop.subpop_id, method, target, status, verdict, est, direct, per, tuple(used))


def read_subpopulations(definitions_path, membership_path) -> list[SubPopulation]:
    """Load sub-populations from a definitions CSV and a membership CSV.

    definitions: ``subpop_id,stratum_id,area_km2`` plus optional
    ``mapped_<domain>`` columns (km^2, e.g. ``mapped_spruce``).
    membership: ``plot_id,subpop_id``.
    """
    areas: dict[str, dict[int, float]] = {}
    mapped: dict[str, dict[int, dict[Domain, float]]] = {}
    with open(definitions_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        need = {"subpop_id", "stratum_id", "area_km2"}
        if not need <= set(cols):
            raise InputError(f"{definitions_path}: header must contain {sorted(need)}")
        mcols = {c: Domain.parse(c[len("mapped_"):]) for c in cols if c.startswith("mapped_")}
        for lineno, row in enumerate(reader, 2):
            try:
                sid, h, a = row["subpop_id"].strip(), int(row["stratum_id"]), float(row["area_km2"])
                m = {d: float(row[c]) for c, d in mcols.items() if row[c] not in (None, "")}
            except (ValueError, InputError) as e:
                raise InputError(f"{definitions_path}:{lineno}: {e}") from None
            if not a >= 0 or any(not v >= 0 for v in m.values()):
                raise InputError(f"{definitions_path}:{lineno}: areas must be >= 0")
            if h in areas.setdefault(sid, {}):
                raise InputError(f"{definitions_path}:{lineno}: duplicate ({sid}, stratum {h})")
            areas[sid][h] = a
            mapped.setdefault(sid, {})[h] = m
    members: dict[str, set[str]] = {sid: set() for sid in areas}
    seen: dict[str, str] = {}
    with open(membership_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not {"plot_id", "subpop_id"} <= set(reader.fieldnames or []):
            raise InputError(f"{membership_path}: header must contain ['plot_id', 'subpop_id']")
        for lineno, row in enumerate(reader, 2):
            pid, sid = row["plot_id"].strip(), row["subpop_id"].strip()
            if sid not in members:
                raise InputError(f"{membership_path}:{lineno}: unknown sub-population {sid!r}")
            if pid in seen and seen[pid] != sid:
                raise InputError(f"{membership_path}:{lineno}: plot {pid} assigned to {seen[pid]} and {sid}")
            seen[pid] = sid
            members[sid].add(pid)
    return [SubPopulation(sid, areas[sid], frozenset(members[sid]), mapped[sid]) for sid in sorted(areas)]
