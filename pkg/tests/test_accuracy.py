import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from forestarea.accuracy import (
    ORIENTATION_HEADER,
    ConfusionMatrix,
    StandRecord,
    confusion_from_codes,
    confusion_to_csv,
    oa,
    pa,
    stand_level_confusion,
    ua,
    weighted_confusion,
)
from forestarea.domains import Domain
from forestarea.errors import InputError
from helpers import plot

SP, PI, DE = Domain.SPRUCE, Domain.PINE, Domain.DECIDUOUS


def test_all_correct_gives_perfect_accuracy():
    plots = [plot(i, 1, lab, 0.1, lab) for i, lab in enumerate(["spruce", "pine", "deciduous", "pine"])]
    m = weighted_confusion(plots)
    assert oa(m) == 1.0
    off = m.cells - np.diag(np.diag(m.cells))
    assert (off == 0).all()


def test_weights_drive_oa():
    plots = [plot(1, 1, "spruce", 1 / 9, "spruce"), plot(2, 2, "pine", 1 / 27, "spruce")]
    m = weighted_confusion(plots, labels=[SP, PI])
    assert oa(m) == pytest.approx(0.25)
    assert m.cells[0, 1] == pytest.approx(27.0)  # row = prediction spruce, column = reference pine


def test_missing_label_is_input_error():
    with pytest.raises(InputError, match="plot 1"):
        weighted_confusion([plot(1, 1, "spruce", 0.1)])


def test_published_forest_mask_metrics():
    m = ConfusionMatrix(["non-forest", "forest"], np.array([[58.0, 4.0], [4.0, 34.0]]))
    assert 100 * oa(m) == pytest.approx(92, abs=1)
    assert 100 * ua(m, "non-forest") == pytest.approx(94, abs=1)
    assert 100 * ua(m, "forest") == pytest.approx(89, abs=1)
    assert 100 * pa(m, "non-forest") == pytest.approx(93, abs=1)
    assert 100 * pa(m, "forest") == pytest.approx(89, abs=1)


SPECIES_MATRIX = np.array([[20.8, 4.3, 3.0], [4.7, 22.9, 3.1], [2.6, 3.0, 35.7]])


def test_published_species_metrics():
    m = ConfusionMatrix([SP, PI, DE], SPECIES_MATRIX)
    assert 100 * ua(m, SP) == pytest.approx(20.8 / 28.1 * 100, rel=1e-12)
    assert 100 * ua(m, SP) == pytest.approx(74.2, abs=0.5)
    assert 100 * pa(m, SP) == pytest.approx(74.2, abs=0.5)
    assert 100 * ua(m, PI) == pytest.approx(74.6, abs=0.5)
    assert 100 * pa(m, PI) == pytest.approx(76.0, abs=0.5)
    assert 100 * ua(m, DE) == pytest.approx(86.6, abs=0.5)
    assert 100 * pa(m, DE) == pytest.approx(85.4, abs=0.5)
    assert 100 * oa(m) == pytest.approx(79.4, abs=0.5)  # cells sum to 100.1 after rounding


def test_identity_and_uniform():
    m = ConfusionMatrix([SP, PI, DE], np.eye(3))
    assert oa(m) == 1.0 and all(ua(m, d) == 1.0 == pa(m, d) for d in (SP, PI, DE))
    u = ConfusionMatrix([SP, PI, DE, Domain.NON_FOREST], np.ones((4, 4)))
    assert oa(u) == pytest.approx(0.25)


def test_zero_marginal_is_undefined():
    m = ConfusionMatrix([SP, PI], np.array([[3.0, 1.0], [0.0, 0.0]]))
    assert ua(m, PI) is None
    assert pa(m, SP) == 1.0
    assert oa(ConfusionMatrix([SP], np.zeros((1, 1)))) is None


def test_stand_plurality_and_tie_break():
    stands = [StandRecord("a", SP, {SP: 10, PI: 0, DE: 0}), StandRecord("b", PI, {SP: 5, PI: 5, DE: 0})]
    m = stand_level_confusion(stands)
    assert m.cells[0, 0] == 1  # hit
    assert m.cells[0, 1] == 1  # tie predicted spruce, reference pine


def test_stand_oa_ninety_percent():
    stands = [StandRecord(str(i), SP, {SP: 7, PI: 2, DE: 1}) for i in range(9)]
    stands.append(StandRecord("x", DE, {SP: 1, PI: 6, DE: 3}))
    assert oa(stand_level_confusion(stands)) == pytest.approx(0.9)


def test_stand_area_weighting_option():
    stands = [StandRecord("a", SP, {SP: 3}, 1000.0), StandRecord("b", PI, {SP: 3}, 3000.0)]
    assert oa(stand_level_confusion(stands)) == 0.5
    assert oa(stand_level_confusion(stands, weight_by_area=True)) == 0.25


def test_empty_stand_is_input_error():
    with pytest.raises(InputError, match="stand e"):
        stand_level_confusion([StandRecord("e", SP, {SP: 0, PI: 0})])


def test_csv_has_orientation_header_and_rounding():
    m = ConfusionMatrix([SP, PI, DE], SPECIES_MATRIX)
    text = confusion_to_csv(m, percent=True)
    assert text.splitlines()[0].startswith(ORIENTATION_HEADER)
    assert "74.0" in text  # UA spruce from rounded cells
    raw = confusion_to_csv(m)
    assert repr(20.8) in raw


matrices = arrays(np.float64, st.tuples(st.integers(2, 5)).map(lambda t: (t[0], t[0])),
                  elements=st.floats(0, 1e3, allow_nan=False))


@settings(max_examples=80, deadline=None)
@given(matrices, st.randoms(use_true_random=False))
def test_oa_invariant_under_joint_permutation(cells, rnd):
    k = cells.shape[0]
    labels = list(range(k))
    perm = list(range(k))
    rnd.shuffle(perm)
    m1 = ConfusionMatrix(labels, cells)
    m2 = ConfusionMatrix([labels[i] for i in perm], cells[np.ix_(perm, perm)])
    if oa(m1) is None:
        assert oa(m2) is None
    else:
        assert oa(m2) == pytest.approx(oa(m1), rel=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2), st.floats(0.01, 100)), min_size=1, max_size=40),
       st.floats(0.001, 1000))
def test_weight_scaling_and_marginals(rows, c):
    ref, pred, w = (np.array(v) for v in zip(*rows))
    m1 = confusion_from_codes(ref, pred, [SP, PI, DE], w)
    m2 = confusion_from_codes(ref, pred, [SP, PI, DE], w * c)
    assert oa(m2) == pytest.approx(oa(m1), rel=1e-9)
    for d in (SP, PI, DE):
        for f in (ua, pa):
            a, b = f(m1, d), f(m2, d)
            assert (a is None) == (b is None)
            if a is not None:
                assert b == pytest.approx(a, rel=1e-9)
    assert m1.cells.sum(axis=1).sum() == pytest.approx(m1.total_weight)
    assert m1.cells.sum(axis=0).sum() == pytest.approx(w.sum())
