import math

import numpy as np
import pytest

from perturbex import fixtures as fx
from perturbex.shift import DepthFn, build_shift
from perturbex.transfer import (
    SpectralError,
    build_ruelle,
    gibbs_bound,
    gibbs_constant,
    gibbs_weights,
    power_iteration,
    pressure,
    spectral_triplet,
)

FULL = build_shift(["1", "2"], [[1, 1], [1, 1]])
GOLDEN = build_shift(["1", "2"], [[1, 1], [1, 0]])
PHI = (1 + math.sqrt(5)) / 2


def zero(s):
    return DepthFn.constant(s, 1, 0.0)


def test_ruelle_matrices():
    assert np.array_equal(build_ruelle(FULL, zero(FULL)).matrix, [[1, 1], [1, 1]])
    assert np.array_equal(build_ruelle(GOLDEN, zero(GOLDEN)).matrix, [[1, 1], [1, 0]])
    a, b = 0.3, 1.7
    m = build_ruelle(FULL, DepthFn(FULL, 1, [math.log(a), math.log(b)])).matrix
    assert np.allclose(m, [[a, b], [a, b]])
    assert np.linalg.matrix_rank(m) == 1


def test_full_shift_triplet():
    t = spectral_triplet(build_ruelle(FULL, zero(FULL)))
    assert t.lam == pytest.approx(2)
    assert np.allclose(t.h, 1) and np.allclose(t.nu, 0.5)


def test_golden_triplet():
    t = spectral_triplet(build_ruelle(GOLDEN, zero(GOLDEN)))
    assert t.lam == pytest.approx(PHI, abs=1e-14)
    assert np.allclose(t.nu, [1 / PHI, 1 / PHI**2], atol=1e-14)
    assert np.allclose(t.h, np.array([PHI, 1]) / (3 - PHI), atol=1e-14)
    assert t.nu @ t.h == pytest.approx(1, abs=1e-15)
    assert max(t.residuals().values()) < 1e-12


def test_pressure_examples():
    assert pressure(FULL, zero(FULL)) == pytest.approx(math.log(2))
    assert pressure(GOLDEN, zero(GOLDEN)) == pytest.approx(0.4812118, abs=1e-7)
    assert pressure(FULL, DepthFn(FULL, 1, [math.log(0.3), math.log(1.7)])) == pytest.approx(math.log(2.0))


def test_gibbs_examples():
    t = spectral_triplet(build_ruelle(FULL, zero(FULL)))
    assert np.allclose(gibbs_weights(t, 1), [0.5, 0.5])
    g = spectral_triplet(build_ruelle(GOLDEN, zero(GOLDEN)))
    assert gibbs_weights(g, 1)[0] == pytest.approx((5 + math.sqrt(5)) / 10, abs=1e-14)
    for d in range(1, 6):
        assert gibbs_weights(g, d).sum() == pytest.approx(1, abs=1e-13)


def test_reducible_and_power_iteration():
    s = build_shift(2, [[1, 1], [0, 1]])
    with pytest.raises(SpectralError):
        spectral_triplet(build_ruelle(s, DepthFn.constant(s, 1, 0.0)))
    assert power_iteration(np.array([[1.0, 1.0], [1.0, 0.0]])) == pytest.approx(PHI, rel=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_random_invariants(seed):
    rng = np.random.default_rng(seed)
    pf = fx.random_family(rng, 1)
    op = build_ruelle(pf.shift, pf.phi, min_depth=2)
    t = spectral_triplet(op)
    f = rng.normal(size=len(t.h))
    assert abs(t.nu @ (t.matrix @ f) - t.lam * (t.nu @ f)) <= 1e-10 * abs(t.lam) * np.abs(f).max()
    n = len(t.h)
    eye = np.eye(n)
    assert np.abs((t.matrix - t.lam * t.projector - t.lam * eye) @ t.resolvent - eye).max() < 1e-10
    assert t.margin > 0
    # shift invariance of the Gibbs measure
    shift = pf.shift
    for d in range(1, 4):
        low, up = gibbs_weights(t, d), gibbs_weights(t, d + 1)
        acc = np.zeros_like(low)
        pos = shift.words(d).position
        for w, v in zip(shift.words(d + 1).words, up):
            acc[pos[w[1:]]] += v
        assert np.allclose(acc, low, atol=1e-12)
    # one Gibbs constant for all depths
    c = gibbs_bound(t, pf.phi)
    for d in range(1, 7):
        lo, hi = gibbs_constant(t, pf.phi, d)
        assert 1 / c - 1e-10 <= lo and hi <= c + 1e-10
