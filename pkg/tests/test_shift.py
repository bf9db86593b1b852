import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perturbex.shift import (
    DepthFn,
    ShiftError,
    admissible_words,
    build_shift,
    d_theta,
    lipschitz_seminorm,
    refine,
    theta_norm,
    word_counts_oracle,
)

FULL = build_shift(["1", "2"], [[1, 1], [1, 1]])
GOLDEN = build_shift(["1", "2"], [[1, 1], [1, 0]])


def test_classification():
    assert FULL.irreducible and FULL.period == 1
    assert GOLDEN.irreducible and GOLDEN.period == 1
    flip = build_shift(2, [[0, 1], [1, 0]])
    assert flip.irreducible and flip.period == 2
    assert not flip.primitive


def test_words():
    assert admissible_words(FULL, 2).words == ((0, 0), (0, 1), (1, 0), (1, 1))
    assert admissible_words(GOLDEN, 2).words == ((0, 0), (0, 1), (1, 0))
    assert len(admissible_words(GOLDEN, 5)) == 13


def test_primitivity_index():
    assert FULL.primitivity_index() == 1
    assert GOLDEN.primitivity_index() == 2


def test_pruning_records_dead_symbols():
    s = build_shift(["a", "b", "c"], [[1, 1, 0], [1, 0, 0], [0, 0, 0]])
    assert s.size == 2 and s.pruned == ("c",) and s.labels == ("a", "b")


def test_bad_matrices():
    with pytest.raises(ShiftError):
        build_shift(2, [[1, 2], [1, 1]])
    with pytest.raises(ShiftError):
        build_shift(2, [[1, 1, 1], [1, 1, 1]])
    with pytest.raises(ShiftError):
        build_shift(2, [[0, 0], [0, 0]])


def test_seminorm_examples():
    assert lipschitz_seminorm(DepthFn(FULL, 1, [3.0, -1.0]), 0.5) == 0
    f = DepthFn(FULL, 2, [1.0, 0.0, 0.0, 0.0])
    assert lipschitz_seminorm(f, 0.5) == pytest.approx(2)
    assert lipschitz_seminorm(f, 0.25) == pytest.approx(4)
    with pytest.raises(ShiftError):
        lipschitz_seminorm(f, 1.0)


def test_refine_examples():
    f = DepthFn(FULL, 1, [1.0, 0.0])
    assert list(refine(f, 2).values) == [1, 1, 0, 0]
    assert refine(f, 1) is f
    g = DepthFn(GOLDEN, 1, [2.0, 5.0])
    assert list(refine(g, 2).values) == [2, 2, 5]
    with pytest.raises(ShiftError):
        refine(refine(f, 2), 1)


def test_theta_metric_and_norm():
    assert d_theta((0, 1, 1), (0, 1, 0), 0.5) == 0.25
    assert d_theta((0, 1), (0, 1), 0.5) == 0.0
    f = DepthFn(FULL, 2, [1.0, 0.0, 0.0, 0.0])
    assert theta_norm(f, 0.5) == pytest.approx(3)


def test_depthfn_call_and_tables():
    f = DepthFn.from_table(GOLDEN, 2, {(0, 0): 1.0, (0, 1): 2.0}, default=0.0)
    assert f((0, 1, 0, 0)) == 2.0 and f((1, 0)) == 0.0
    with pytest.raises(ShiftError):
        DepthFn.from_table(GOLDEN, 2, {(0, 0): 1.0})
    ind = DepthFn.indicator(GOLDEN, (1,), depth=2)
    assert list(ind.values) == [0, 0, 1]


@st.composite
def shifts(draw):
    k = draw(st.integers(2, 4))
    rows = draw(st.lists(st.lists(st.integers(0, 1), min_size=k, max_size=k), min_size=k, max_size=k))
    try:
        return build_shift(k, rows)
    except ShiftError:
        return FULL


@settings(max_examples=40, deadline=None)
@given(shifts(), st.integers(1, 8))
def test_word_counts(s, m):
    assert len(s.words(m)) == word_counts_oracle(s, m)


@settings(max_examples=40, deadline=None)
@given(shifts(), st.integers(1, 3), st.floats(0.05, 0.95), st.randoms(use_true_random=False))
def test_refinement_properties(s, m, theta, rnd):
    n = len(s.words(m))
    f = DepthFn(s, m, [rnd.uniform(-1, 1) for _ in range(n)])
    g = DepthFn(s, m, [rnd.uniform(-1, 1) for _ in range(n)])
    assert np.allclose(refine(f * g, m + 1).values, (refine(f, m + 1) * refine(g, m + 1)).values)
    assert lipschitz_seminorm(refine(f, m + 1), theta) == pytest.approx(lipschitz_seminorm(f, theta), rel=1e-12)
