import math
from fractions import Fraction
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forestarea import tables
from forestarea.domains import Domain
from forestarea.errors import EmptyGroupError, InputError, VarianceUndefinedError
from forestarea.estimation import (
    IN_DOMAIN,
    OUT_OF_DOMAIN,
    PostStratumGroup,
    Stratum,
    build_poststrata,
    direct_estimate,
    format_re,
    ma_variance_exact_mask,
    model_assisted_estimate,
    poststratified_estimate,
    relative_efficiency,
)
from helpers import oracle, plot

S = Domain.SPRUCE


# -- frozen hand values -------------------------------------------------------

def test_direct_single_stratum_hand_values():
    plots = [plot(i, 1, o, 3 / 90) for i, o in enumerate(["spruce", "pine", "spruce"])]
    e = direct_estimate(plots, [Stratum(1, 90.0)], S)
    assert e.total == pytest.approx(60.0, rel=1e-15)
    assert e.variance == pytest.approx(900.0, rel=1e-14)
    assert e.se == pytest.approx(30.0)
    assert e.cv == pytest.approx(0.5)


def test_direct_constant_indicator_has_zero_variance():
    plots = [plot(i, 1 + i % 2, "spruce", 0.1) for i in range(6)]
    e = direct_estimate(plots, [Stratum(1, 100.0), Stratum(2, 50.0)], S)
    assert e.total == 150.0
    assert e.variance == 0.0


def test_ma_hand_values():
    plots = [
        plot(1, 1, "spruce", 3 / 90, "spruce"),
        plot(2, 1, "spruce", 3 / 90, "pine"),
        plot(3, 1, "pine", 3 / 90, "pine"),
    ]
    e = model_assisted_estimate(plots, [Stratum(1, 90.0)], S, 40.0)
    assert e.correction == pytest.approx(30.0, rel=1e-14)
    assert e.total == pytest.approx(70.0, rel=1e-14)
    assert e.synthetic == 40.0
    assert e.variance == pytest.approx(900.0, rel=1e-14)


def test_ma_balanced_errors_zero_correction_positive_variance():
    w = 9.0
    plots = [
        plot(1, 1, "spruce", 1 / w, "pine"),  # false negative
        plot(2, 1, "pine", 1 / w, "spruce"),  # false positive
        plot(3, 1, "spruce", 1 / w, "spruce"),
        plot(4, 1, "pine", 1 / w, "pine"),
    ]
    e = model_assisted_estimate(plots, [Stratum(1, 36.0)], S, 12.0)
    assert e.correction == 0.0
    assert e.total == 12.0
    assert e.variance > 0


def test_ps_hand_values():
    plots = [
        plot(1, 1, "spruce", 5 / 90, "spruce"),
        plot(2, 1, "spruce", 5 / 90, "spruce"),
        plot(3, 1, "pine", 5 / 90, "spruce"),
        plot(4, 1, "pine", 5 / 90, "pine"),
        plot(5, 1, "non-forest", 5 / 90, "non-forest"),
    ]
    strata = [Stratum(1, 90.0)]
    groups = build_poststrata(plots, strata, S, {1: 60.0})
    assert [g.mapped_area for g in groups[1]] == [60.0, 30.0]
    e = poststratified_estimate(plots, strata, groups, S)
    assert e.total == pytest.approx(40.0, rel=1e-15)
    assert e.variance == pytest.approx(400.0, rel=1e-14)


def test_relative_efficiency_values_and_sentinels():
    assert relative_efficiency(100, 100) == 1.0
    assert relative_efficiency(150, 100) == 1.5
    assert relative_efficiency(100, 0) == math.inf
    assert relative_efficiency(0, 0) is None
    assert format_re(None) == "undefined"
    assert format_re(math.inf) == "inf"
    with pytest.raises(InputError):
        relative_efficiency(-1, 1)


# -- bundled fixture ----------------------------------------------------------

def _fixture():
    data = resources.files("forestarea") / "data"
    plots, _ = tables.read_plots(data / "fixture_plots.csv")
    strata = tables.read_strata(data / "fixture_strata.csv")
    mapped = tables.read_mapped_areas(data / "fixture_mapped.csv")
    return plots, strata, mapped


# Hand computations for the 12-plot fixture (two strata: A=60 with w=10, A=30 with w=5).
FIXTURE_EXPECTED = {
    # domain: (direct total, direct var, MA C, MA total, MA var, PS total, PS var)
    "spruce": (40.0, 220.0, 10.0, 45.0, 100.0, 43.75, 76.5625),
    "pine": (15.0, 125.0, -5.0, 10.0, 125.0, 12.5, 81.25),
    "deciduous": (15.0, 125.0, 5.0, 13.0, 125.0, 14.0, 116.0),
    "non-forest": (20.0, 140.0, -10.0, 22.0, 100.0, 22.0, 100.0),
    "forest-total": (70.0, 140.0, 10.0, 68.0, 100.0, 68.0, 100.0),
}


@pytest.mark.parametrize("domain", sorted(FIXTURE_EXPECTED))
def test_fixture_hand_values(domain):
    plots, strata, mapped = _fixture()
    d = Domain.parse(domain)
    td, vd, c, tma, vma, tps, vps = FIXTURE_EXPECTED[domain]
    direct = direct_estimate(plots, strata, d)
    assert (direct.total, direct.variance) == (pytest.approx(td), pytest.approx(vd))
    ma = model_assisted_estimate(plots, strata, d, math.fsum(mapped[d].values()))
    assert ma.correction == pytest.approx(c)
    assert (ma.total, ma.variance) == (pytest.approx(tma), pytest.approx(vma))
    ps = poststratified_estimate(plots, strata, build_poststrata(plots, strata, d, mapped[d]), d)
    assert (ps.total, ps.variance) == (pytest.approx(tps), pytest.approx(vps))


def test_fixture_matches_exact_oracle():
    plots, strata, mapped = _fixture()
    for d in ("spruce", "pine", "deciduous", "non-forest", "forest-total"):
        dom = Domain.parse(d)
        inst = {
            "areas": {s.stratum_id: Fraction(s.area) for s in strata},
            "plots": [(p.stratum_id, p.observed.value, p.predicted.value, Fraction(p.inclusion_probability))
                      for p in plots],
            "mapped": {h: Fraction(a) for h, a in mapped[dom].items()},
        }
        ref = oracle(inst, d)
        got = {
            "direct": direct_estimate(plots, strata, dom),
            "ma": model_assisted_estimate(plots, strata, dom, math.fsum(mapped[dom].values())),
            "ps": poststratified_estimate(plots, strata, build_poststrata(plots, strata, dom, mapped[dom]), dom),
        }
        for k, e in got.items():
            assert e.total == pytest.approx(float(ref[k][0]), rel=1e-12)
            assert e.variance == pytest.approx(float(ref[k][1]), rel=1e-12)


# -- errors and partial variance ------------------------------------------------

def test_unknown_stratum_is_input_error():
    with pytest.raises(InputError, match="unknown stratum 7"):
        direct_estimate([plot(1, 7, "spruce", 0.1), plot(2, 7, "pine", 0.1)], [Stratum(1, 10.0)], S)


def test_singleton_stratum_variance():
    plots = [plot(1, 1, "spruce", 0.1), plot(2, 1, "pine", 0.1), plot(3, 2, "spruce", 0.2)]
    strata = [Stratum(1, 20.0), Stratum(2, 5.0)]
    with pytest.raises(VarianceUndefinedError):
        direct_estimate(plots, strata, S)
    e = direct_estimate(plots, strata, S, require_variance=False)
    assert e.variance_status == "partial"
    assert e.total == pytest.approx(10.0 + 5.0)
    assert e.variance == pytest.approx(400 * 0.5 / 2)
    assert e.strata[1].variance is None


def test_stratum_with_area_but_no_plots_is_rejected():
    with pytest.raises(InputError, match="no plots"):
        direct_estimate([plot(1, 1, "spruce", 0.1), plot(2, 1, "pine", 0.1)], [Stratum(1, 20.0), Stratum(2, 5.0)], S)


def test_ma_missing_prediction_is_input_error():
    plots = [plot(1, 1, "spruce", 0.1, "spruce"), plot(2, 1, "pine", 0.1)]
    with pytest.raises(InputError, match="plot 2"):
        model_assisted_estimate(plots, [Stratum(1, 20.0)], S, 5.0)


def test_ps_empty_group_and_singleton_group():
    plots = [plot(i, 1, "pine", 0.1, "pine") for i in range(4)]
    strata = [Stratum(1, 40.0)]
    with pytest.raises(EmptyGroupError):
        poststratified_estimate(plots, strata, build_poststrata(plots, strata, S, {1: 10.0}), S)
    plots[0] = plot(0, 1, "spruce", 0.1, "spruce")
    with pytest.raises(VarianceUndefinedError):
        poststratified_estimate(plots, strata, build_poststrata(plots, strata, S, {1: 10.0}), S)
    # empty group with zero mapped area is fine
    plots = [plot(i, 1, "pine", 0.1, "pine") for i in range(4)]
    e = poststratified_estimate(plots, strata, build_poststrata(plots, strata, S, {1: 0.0}), S)
    assert e.total == 0.0


def test_ps_rejects_bad_partition_and_area_sum():
    plots = [plot(i, 1, "pine", 0.1, "pine") for i in range(4)]
    strata = [Stratum(1, 40.0)]
    bad = {1: [PostStratumGroup(1, IN_DOMAIN, 10.0, ("0", "1")), PostStratumGroup(1, OUT_OF_DOMAIN, 30.0, ("1", "2", "3"))]}
    with pytest.raises(InputError, match="partition"):
        poststratified_estimate(plots, strata, bad, S)
    bad = {1: [PostStratumGroup(1, IN_DOMAIN, 10.0, ("0", "1")), PostStratumGroup(1, OUT_OF_DOMAIN, 20.0, ("2", "3"))]}
    with pytest.raises(InputError, match="sum"):
        poststratified_estimate(plots, strata, bad, S)
    with pytest.raises(InputError):
        build_poststrata(plots, strata, S, {1: 50.0})


def test_forest_total_cannot_be_observed():
    with pytest.raises(InputError):
        plot(1, 1, "forest-total", 0.1)


def test_unstocked_counts_for_forest_total_only():
    plots = [plot(1, 1, "unstocked", 0.1), plot(2, 1, "non-forest", 0.1)]
    strata = [Stratum(1, 20.0)]
    assert direct_estimate(plots, strata, Domain.FOREST_TOTAL).total == 10.0
    for d in (Domain.SPRUCE, Domain.PINE, Domain.DECIDUOUS):
        assert direct_estimate(plots, strata, d).total == 0.0


# -- exact-mask variance --------------------------------------------------------

def test_exact_mask_variance_leq_ma_with_mask_errors():
    # plot 2 is forest (spruce) but outside the mask; with an error-free mask it is predicted spruce
    base = [
        ("spruce", "spruce", "spruce"),
        ("spruce", "non-forest", "spruce"),
        ("pine", "pine", "pine"),
        ("non-forest", "spruce", None),
    ]
    plots = [
        plot(i, 1, o, 0.1, p, predicted_exact_mask=None if x is None else Domain.parse(x))
        for i, (o, p, x) in enumerate(base)
    ]
    strata = [Stratum(1, 40.0)]
    ma = model_assisted_estimate(plots, strata, S, 10.0)
    ex = ma_variance_exact_mask(plots, strata, S)
    assert math.isnan(ex.total)
    assert ex.variance < ma.variance
    assert ex.variance == 0.0


def test_exact_mask_all_non_forest_zero_variance():
    plots = [plot(i, 1, "non-forest", 0.1, "spruce") for i in range(3)]
    assert ma_variance_exact_mask(plots, [Stratum(1, 30.0)], S).variance == 0.0


# -- properties -------------------------------------------------------------------

LABELS = ["spruce", "pine", "deciduous", "non-forest", "unstocked"]
TARGETS = LABELS[:4] + ["forest-total"]


@st.composite
def instances(draw, max_plots=12):
    n_strata = draw(st.integers(1, 3))
    areas = {h: draw(st.integers(1, 500)) for h in range(1, n_strata + 1)}
    plots = []
    for h in areas:
        n = draw(st.integers(2, max(2, max_plots // n_strata)))
        for _ in range(n):
            plots.append((h, draw(st.sampled_from(LABELS)), draw(st.sampled_from(LABELS))))
    return areas, plots


def _build(areas, plots):
    counts = {h: sum(1 for p in plots if p[0] == h) for h in areas}
    strata = [Stratum(h, float(a)) for h, a in areas.items()]
    sp = [plot(f"p{i}", h, o, counts[h] / areas[h], pr) for i, (h, o, pr) in enumerate(plots)]
    return strata, sp


@settings(max_examples=60, deadline=None)
@given(instances(), st.randoms(use_true_random=False))
def test_permutation_invariance(inst, rnd):
    strata, sp = _build(*inst)
    shuffled = list(sp)
    rnd.shuffle(shuffled)
    for t in TARGETS:
        d = Domain.parse(t)
        assert direct_estimate(sp, strata, d) == direct_estimate(shuffled, strata, d)
        assert model_assisted_estimate(sp, strata, d, 3.0) == model_assisted_estimate(shuffled, strata, d, 3.0)


@settings(max_examples=60, deadline=None)
@given(instances())
def test_additivity_over_partition(inst):
    strata, sp = _build(*inst)
    total = math.fsum(direct_estimate(sp, strata, Domain.parse(t)).total for t in LABELS)
    assert total == pytest.approx(math.fsum(s.area for s in strata), rel=10 * 2.2e-16)
    forest = direct_estimate(sp, strata, Domain.FOREST_TOTAL).total
    nf = direct_estimate(sp, strata, Domain.NON_FOREST).total
    assert forest + nf == pytest.approx(math.fsum(s.area for s in strata), rel=10 * 2.2e-16)


@settings(max_examples=60, deadline=None)
@given(instances())
def test_ps_single_group_reproduces_direct_bitwise(inst):
    strata, sp = _build(*inst)
    groups = {
        s.stratum_id: [PostStratumGroup(s.stratum_id, "all", s.area,
                                        tuple(p.plot_id for p in sp if p.stratum_id == s.stratum_id))]
        for s in strata
    }
    for t in TARGETS:
        d = Domain.parse(t)
        a, b = direct_estimate(sp, strata, d), poststratified_estimate(sp, strata, groups, d)
        assert a.total == b.total and a.variance == b.variance


@settings(max_examples=60, deadline=None)
@given(instances(), st.floats(0, 1000))
def test_perfect_predictions_ma_exact(inst, synth):
    areas, plots = inst
    strata, sp = _build(areas, [(h, o, o) for h, o, _ in plots])
    for t in TARGETS:
        e = model_assisted_estimate(sp, strata, Domain.parse(t), synth)
        assert e.variance == 0.0
        assert e.correction == 0.0
        assert e.total == synth


@settings(max_examples=60, deadline=None)
@given(instances())
def test_correction_sign_follows_weighted_error_balance(inst):
    strata, sp = _build(*inst)
    for t in TARGETS:
        d = Domain.parse(t)
        from forestarea.domains import indicator

        fn = math.fsum(p.sampling_weight for p in sp if indicator(p.observed, d) and not indicator(p.predicted, d))
        fp = math.fsum(p.sampling_weight for p in sp if not indicator(p.observed, d) and indicator(p.predicted, d))
        c = model_assisted_estimate(sp, strata, d, 0.0).correction
        assert (c > 1e-9) == (fn - fp > 1e-9)
        assert c == pytest.approx(fn - fp, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(instances(), st.integers(1, 1000))
def test_area_scaling(inst, k):
    areas, plots = inst
    s1, p1 = _build(areas, plots)
    s2, p2 = _build({h: a * k for h, a in areas.items()}, plots)
    a, b = direct_estimate(p1, s1, S), direct_estimate(p2, s2, S)
    assert b.total == pytest.approx(k * a.total, rel=1e-12)
    assert b.variance == pytest.approx(k * k * a.variance, rel=1e-12, abs=1e-9)
    assert b.variance >= 0
