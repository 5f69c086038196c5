import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forestarea.domains import Domain
from forestarea.errors import InputError
from forestarea.estimation import Stratum, direct_estimate, model_assisted_estimate
from forestarea.smallarea import (
    MA_MIN_PLOTS,
    STATUS_INAPPLICABLE,
    STATUS_OK,
    STATUS_PARTIAL,
    SubPopulation,
    estimate_subpop,
    gate_check,
    read_subpopulations,
)
from helpers import plot

SP = Domain.SPRUCE


def make_plots(stratum, pairs, start=0, pi=0.01):
    """pairs: list of (observed, predicted)."""
    return [plot(f"h{stratum}-{start + i}", stratum, o, pi, p) for i, (o, p) in enumerate(pairs)]


def subpop_of(plots, areas, mapped=None, sid="m"):
    return SubPopulation(sid, areas, frozenset(p.plot_id for p in plots), mapped or {})


def test_ma_gate_threshold():
    ps = make_plots(1, [("spruce", "spruce")] * 29)
    v = gate_check(subpop_of(ps, {1: 10.0}), ps, "ma", SP)
    assert not v.overall and "29 < 30" in v.reasons[1]
    ps += make_plots(1, [("pine", "pine")], start=29)
    assert gate_check(subpop_of(ps, {1: 10.0}), ps, "ma", SP).overall


def test_ps_gate_groups():
    ps = make_plots(1, [("spruce", "spruce")] * 25 + [("pine", "pine")] * 25)
    assert gate_check(subpop_of(ps, {1: 10.0}), ps, "ps", SP).overall
    ps = make_plots(1, [("spruce", "spruce")] * 10 + [("pine", "pine")] * 400)
    v = gate_check(subpop_of(ps, {1: 10.0}), ps, "ps", SP)
    assert not v.overall and "in=10" in v.reasons[1]
    assert gate_check(subpop_of(ps, {1: 10.0}), ps, "ma", SP).overall


def test_gate_ignores_non_members():
    ps = make_plots(1, [("spruce", "spruce")] * 40)
    sub = SubPopulation("m", {1: 5.0}, frozenset(p.plot_id for p in ps[:20]))
    assert not gate_check(sub, ps, "ma", SP).overall
    with pytest.raises(InputError):
        gate_check(sub, ps, "direct", SP)


def population():
    pairs1 = [("spruce", "spruce")] * 20 + [("spruce", "pine")] * 4 + [("pine", "pine")] * 12 + \
             [("non-forest", "non-forest")] * 8 + [("pine", "spruce")] * 2
    pairs2 = [("spruce", "spruce")] * 6 + [("deciduous", "deciduous")] * 20 + [("non-forest", "non-forest")] * 9
    plots = make_plots(1, pairs1) + make_plots(2, pairs2)
    areas = {1: 400.0, 2: 350.0}
    mapped = {1: {SP: 160.0, Domain.PINE: 150.0, Domain.NON_FOREST: 90.0},
              2: {SP: 60.0, Domain.DECIDUOUS: 200.0, Domain.NON_FOREST: 90.0}}
    return plots, areas, mapped


def test_whole_population_equals_national():
    plots, areas, mapped = population()
    sub = subpop_of(plots, areas, mapped)
    strata = [Stratum(h, a) for h, a in areas.items()]
    d = estimate_subpop(sub, plots, "direct", SP)
    ref = direct_estimate(plots, strata, SP)
    assert d.status == STATUS_OK and d.estimate.total == ref.total and d.estimate.variance == ref.variance
    ma = estimate_subpop(sub, plots, "ma", SP)
    ref_ma = model_assisted_estimate(plots, strata, SP, 220.0)
    assert ma.status == STATUS_OK
    assert ma.estimate.total == pytest.approx(ref_ma.total, rel=1e-15)
    assert ma.estimate.variance == pytest.approx(ref_ma.variance, rel=1e-15)
    assert ma.estimate.relative_efficiency == pytest.approx(ref.variance / ref_ma.variance)


def test_partial_when_one_stratum_fails():
    plots, areas, mapped = population()
    res = estimate_subpop(subpop_of(plots, areas, mapped), plots, "ps", SP)
    # stratum 2 has only 6 plots mapped spruce: PS not applicable there
    assert res.status == STATUS_PARTIAL and res.strata_used == (1,)
    assert set(res.per_stratum) == {1}
    assert res.direct.total == direct_estimate([p for p in plots if p.stratum_id == 1], [Stratum(1, 400.0)], SP).total


def test_inapplicable_carries_no_numbers():
    ps = make_plots(1, [("spruce", "spruce")] * 5 + [("pine", "pine")] * 5)
    res = estimate_subpop(subpop_of(ps, {1: 3.0}, {1: {SP: 1.5}}), ps, "ma", SP)
    assert res.status == STATUS_INAPPLICABLE and res.estimate is None and res.per_stratum == {}


def test_anticorrelated_map_re_below_one():
    pairs = [("spruce", "pine")] * 18 + [("pine", "spruce")] * 12 + [("spruce", "spruce")] * 2 + [("pine", "pine")] * 2
    ps = make_plots(1, pairs)
    res = estimate_subpop(subpop_of(ps, {1: 100.0}, {1: {SP: 40.0}}), ps, "ma", SP)
    assert res.status == STATUS_OK
    assert res.estimate.relative_efficiency < 1


def test_perfect_map_re_infinite():
    ps = make_plots(1, [("spruce", "spruce")] * 15 + [("pine", "pine")] * 20)
    res = estimate_subpop(subpop_of(ps, {1: 100.0}, {1: {SP: 43.0}}), ps, "ma", SP)
    assert res.estimate.relative_efficiency == math.inf


def test_direct_additive_over_partition():
    plots, areas, mapped = population()
    parts = {"a": [], "b": [], "c": []}
    for i, p in enumerate(plots):
        parts["abc"[i % 3]].append(p)
    n_h = {h: sum(1 for p in plots if p.stratum_id == h) for h in areas}
    total = 0.0
    for ps in parts.values():
        sub_areas = {h: areas[h] * sum(1 for p in ps if p.stratum_id == h) / n_h[h] for h in areas}
        total += estimate_subpop(subpop_of(ps, sub_areas), ps, "direct", SP).estimate.total
    national = direct_estimate(plots, [Stratum(h, a) for h, a in areas.items()], SP).total
    assert total == pytest.approx(national, rel=1e-12)


def test_direct_skips_unsampled_stratum():
    ps = make_plots(1, [("spruce", "spruce"), ("pine", "pine"), ("spruce", "pine")])
    res = estimate_subpop(subpop_of(ps, {1: 3.0, 2: 1.0}), ps, "direct", SP)
    assert res.status == STATUS_PARTIAL and res.strata_used == (1,)
    assert res.estimate.total == pytest.approx(2.0)


labels = st.sampled_from(["spruce", "pine", "non-forest"])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 2), labels, labels), max_size=120),
       st.lists(st.tuples(st.integers(1, 2), labels, labels), max_size=60),
       st.sampled_from(["ma", "ps"]))
def test_gate_monotone_under_adding_plots(base, extra, method):
    ps = [plot(f"b{i}", h, o, 0.1, p) for i, (h, o, p) in enumerate(base)]
    more = ps + [plot(f"e{i}", h, o, 0.1, p) for i, (h, o, p) in enumerate(extra)]
    before = gate_check(subpop_of(ps, {1: 1.0, 2: 1.0}), ps, method, SP)
    after = gate_check(subpop_of(more, {1: 1.0, 2: 1.0}), more, method, SP)
    for h, ok in before.per_stratum.items():
        if ok:
            assert after.per_stratum[h]


def test_gate_constant():
    assert MA_MIN_PLOTS == 30


def test_read_subpopulations(tmp_path):
    d = tmp_path / "def.csv"
    m = tmp_path / "mem.csv"
    d.write_text("subpop_id,stratum_id,area_km2,mapped_spruce,mapped_pine\n"
                 "k1,1,10.5,4,3\nk1,2,2.0,1,\nk2,1,7,0,7\n")
    m.write_text("plot_id,subpop_id\np1,k1\np2,k1\np3,k2\n")
    subs = read_subpopulations(d, m)
    assert [s.subpop_id for s in subs] == ["k1", "k2"]
    k1 = subs[0]
    assert k1.stratum_areas == {1: 10.5, 2: 2.0} and k1.plot_ids == {"p1", "p2"}
    assert k1.mapped_area(1, SP) == 4.0 and k1.mapped_area(2, Domain.PINE) == 0.0
    assert k1.mapped_area(1, Domain.FOREST_TOTAL) == 7.0
    m.write_text("plot_id,subpop_id\np1,k1\np1,k2\n")
    with pytest.raises(InputError, match="mem.csv:3"):
        read_subpopulations(d, m)
    m.write_text("plot_id,subpop_id\np1,zz\n")
    with pytest.raises(InputError, match="unknown"):
        read_subpopulations(d, m)
    d.write_text("subpop_id,stratum_id,area_km2\nk1,1,-1\n")
    with pytest.raises(InputError, match="def.csv:2"):
        read_subpopulations(d, m)
