import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perturbex import fixtures as fx
from perturbex.perturb import FamilyError, direct_remainders
from perturbex.shift import DepthFn, build_shift, difference_operator
from perturbex.thermo import (
    PotentialFamily,
    bell_coefficients,
    bell_sum,
    build_family,
    gibbs_expansion,
    op_norm_F,
    op_norm_F_to_C,
    pressure_expansion,
    theorem_criteria_check,
    thermo_expansion,
)

GRID = [1e-2, 5e-3, 2.5e-3, 1.25e-3]
ONE = np.array([1.0, 0.0])


def test_bell_examples():
    p1 = np.array([0.3, -1.2])
    f = bell_coefficients([p1, 0 * p1, 0 * p1])
    for k, v in enumerate(f, 1):
        assert np.allclose(v, p1**k / math.factorial(k))
    p2 = np.array([2.0, 0.5])
    assert np.allclose(bell_coefficients([p1, p2])[1], p2 + p1**2 / 2)
    assert all(not np.any(v) for v in bell_coefficients([0 * p1] * 3))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.floats(-2, 2), min_size=3, max_size=3), min_size=1, max_size=4))
def test_bell_routes_agree(rows):
    # the built-in check raises if the partition sum and the exp jet disagree beyond 1e-12
    bell_coefficients([np.array(r) for r in rows], check=True, rtol=1e-12)


def test_exp_consistency():
    pf = fx.random_families(1, n=3, seed=3)[0]
    phis = [c.values for c in pf.coeffs]
    fs = bell_coefficients(phis)
    n = len(fs)
    # next coefficient of exp(sum phi_j eps^j) with phi_{n+1} = 0
    nxt = bell_coefficients(phis + [0 * phis[0]])[n]
    for e in (1e-2, 1e-3):
        m = mpmath.mpf(e)
        exact = np.array([mpmath.exp(sum(p[i] * m ** (j + 1) for j, p in enumerate(phis))) for i in range(len(phis[0]))])
        poly = 1 + sum(f * m ** (k + 1) for k, f in enumerate(fs))
        rem = np.asarray((exact - poly) / m**n, float)
        assert np.allclose(rem / e, nxt, rtol=30 * e, atol=30 * e)


def test_build_family_examples():
    pf = fx.fix_a(2)
    fam = build_family(pf)
    assert np.allclose(fam.coeffs[0], fam.base.matrix @ np.diag([1.0, 0.0]))
    fb = build_family(fx.fix_b(1))
    e = 0.2
    assert np.allclose(fb(e), [[math.exp(e), 1], [math.exp(e), 0]])
    zf = build_family(fx.zero_family())
    assert np.allclose(zf(0.3), zf.base.matrix)


def test_pressure_examples():
    te = thermo_expansion(build_family(fx.fix_a(3)), ONE, phi1=ONE)
    assert float(te.p[1]) == pytest.approx(0.5, abs=1e-12)
    assert float(te.p[2]) == pytest.approx(0.125, abs=1e-12)
    golden = (1 + math.sqrt(5)) / 2
    tb = thermo_expansion(build_family(fx.fix_b(2)), ONE, phi1=ONE)
    assert float(tb.p[1]) == pytest.approx(golden / math.sqrt(5), abs=1e-12)
    assert float(tb.mu[0]) == pytest.approx((5 + math.sqrt(5)) / 10, abs=1e-12)
    assert tb.checks["p1_mu0_phi1"] < 1e-10
    tz = thermo_expansion(build_family(fx.zero_family()))
    assert all(float(v) == 0 for v in tz.p[1:])


def test_gibbs_examples():
    mu, _ = gibbs_expansion(build_family(fx.fix_a(2)), ONE)
    assert float(mu[1]) == pytest.approx(0.25, abs=1e-12)
    te = thermo_expansion(build_family(fx.fix_b(3)))
    assert te.checks["mu_one"] < 1e-12 and te.checks["mu0_one"] < 1e-12


@pytest.mark.parametrize("pf", fx.random_families(10, n=2, seed=11), ids=lambda p: p.label)
def test_p1_identity_random(pf):
    fam = build_family(pf)
    te = thermo_expansion(fam, phi1=pf.coeffs[0].refine(fam.base.op.depth).values)
    assert te.checks["p1_mu0_phi1"] <= 1e-10


def test_pressure_remainder_scaling():
    fam = build_family(fx.fix_b(2))
    n = 2
    r = {e: abs(float(pressure_expansion(fam, e)[1][n])) * e**n for e in (1e-2, 1e-3)}
    c = r[1e-2] / 1e-2 ** (n + 1)
    assert r[1e-3] <= 2 * c * 1e-3 ** (n + 1)


def test_gibbs_remainder_direct_matches_definition():
    fam = build_family(fx.fix_a(2))
    e = 0.05
    mu, rem = gibbs_expansion(fam, ONE, e)
    exact = mpmath.exp(e) / (mpmath.exp(e) + 1)
    want = direct_remainders([mpmath.mpf(float(x)) for x in mu], exact, mpmath.mpf(e))
    assert rem == pytest.approx([float(x) for x in want], rel=1e-8)


def test_norm_brackets():
    s = build_shift(2, [[1, 1], [1, 1]])
    diff = difference_operator(s, 2, 0.5)
    a = np.random.default_rng(0).normal(size=(4, 4))
    b = op_norm_F(a, diff, samples=300)
    assert 0 < b.lower <= b.upper
    c = op_norm_F_to_C(a, diff, samples=300)
    assert 0 < c.lower <= c.upper


def test_criteria_examples():
    pf = fx.fix_a(2)
    pf.theta = lambda e: 0.5
    ind = DepthFn.indicator(pf.shift, (0,))
    rep = theorem_criteria_check(pf, GRID, f=ind, min_depth=2)
    assert all(rep.hypothesis_holds.values()) and all(rep.conclusion_holds.values())
    sq = theorem_criteria_check(fx.sqrt_potential_family(), GRID, f=ONE, theorems=("i",))
    assert not sq.hypothesis_holds["i"] and not sq.conclusion_holds["i"]
    assert sq.consistent()["i"]
    z = theorem_criteria_check(fx.zero_family(), GRID, theorems=("i", "ii"))
    assert all(max(v) <= 1e-12 for q, v in z.series.items() if q != "ii:phi_seminorm2")
    with pytest.raises(FamilyError):
        theorem_criteria_check(fx.fix_a(2), GRID)


def test_family_validation():
    s = build_shift(2, [[1, 1], [1, 1]])
    with pytest.raises(FamilyError):
        PotentialFamily(s, DepthFn.constant(s, 1, 0.0), [DepthFn.constant(s, 2, 0.0)])


def test_bell_sum_scalar():
    assert bell_sum([1.0, 1.0], 2) == pytest.approx(1.5)
