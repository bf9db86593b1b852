import math

import mpmath
import numpy as np
import pytest

from perturbex import fixtures as fx
from perturbex.gapaudit import (
    AuditError,
    GapSchedule,
    bound_S_norm,
    bound_tL,
    c_of_eps,
    check_B1_B2,
    empirical_gap,
    gapfree_expansion_check,
    log_c_of_eps,
)
from perturbex.shift import DepthFn, refine
from perturbex.thermo import PotentialFamily, build_family
from perturbex.transfer import spectral_triplet

GRID = [1e-2, 1e-3, 1e-4, 1e-5]


def test_c_examples():
    assert float(c_of_eps(0.9, 0.0)) == pytest.approx(1e4, rel=1e-12)
    n = 2
    for e in GRID:
        theta = 1 - mpmath.mpf(e) ** (mpmath.mpf(1) / (4 * (n + 2)))
        assert float(c_of_eps(theta, 0.0) * mpmath.mpf(e) ** (mpmath.mpf(1) / (n + 2))) == pytest.approx(1, rel=1e-12)
    big = log_c_of_eps(1 - mpmath.mpf("1e-40"), 1.0)
    assert mpmath.isfinite(big) and big > 1e40
    assert mpmath.isfinite(c_of_eps(1 - mpmath.mpf("1e-40"), 1.0))
    with pytest.raises(AuditError):
        c_of_eps(1.0, 0.0)


def test_c_properties():
    thetas = np.linspace(0.05, 0.95, 19)
    for lip in (0.0, 0.3):
        vals = [float(log_c_of_eps(t, lip)) for t in thetas]
        assert all(b > a for a, b in zip(vals, vals[1:]))
    for t in thetas:
        assert float(c_of_eps(t, 0.0) * (1 - mpmath.mpf(t)) ** 4) == pytest.approx(1, rel=1e-14)


def test_b_conditions():
    sched = GapSchedule(fx.fix_a(2), 0.5, "power")
    b = check_B1_B2(sched, GRID)
    assert b.b1_pass and b.b2_pass
    assert b.b1_margin == pytest.approx([1.0] * 4, rel=1e-12)
    assert b.b2_margin == [0.0] * 4
    boundary = [e ** (1 / 4) for e in GRID]
    assert not check_B1_B2(sched, GRID, remainder_norms=boundary).b2_pass
    const = check_B1_B2(GapSchedule(fx.fix_a(2), 0.5, "constant"), GRID)
    assert const.b1_pass
    with pytest.raises(AuditError):
        check_B1_B2(sched, GRID, remainder_norms=[0.0])


def _base(pf, depth=2):
    fam = build_family(pf, min_depth=depth)
    return spectral_triplet(fam.base.op), refine(pf.phi, depth).values


def test_S_bound_full_shift():
    t, pv = _base(fx.fix_a(1))
    b = bound_S_norm(t, 0.9, pv, 0.5, samples=200)
    assert b.c_sc == 0
    assert b.dominates
    assert b.empirical_lower <= b.empirical_upper


def test_S_bound_golden():
    t, pv = _base(fx.fix_b(1))
    assert t.op.shift.primitivity_index() == 2
    b = bound_S_norm(t, 0.9, pv, 0.5, samples=200)
    assert mpmath.isfinite(b.chain) and b.dominates


def test_S_bound_over_c_converges():
    t, pv = _base(fx.fix_b(1))
    ratios = [float(bound_S_norm(t, 1 - d, pv, 0.5, samples=0).lemma / c_of_eps(1 - d, 0.0)) for d in (1e-2, 1e-3, 1e-4)]
    assert ratios[-1] == pytest.approx(ratios[-2], rel=1e-6)


def test_tL_zero_remainder():
    sched = GapSchedule(fx.fix_b(2), 0.5, "power")
    for k in range(3):
        for lb in bound_tL(sched, GRID, k, samples=100):
            assert lb.literal == pytest.approx(lb.c16 * lb.eps, rel=1e-12)
            assert lb.dominates


def test_tL_order_zero_fix_a():
    s = fx.fix_a(1).shift
    ind = np.array([1.0, 0.0])
    pf = PotentialFamily(s, DepthFn.constant(s, 1, 0.0), [], remainder=lambda e: ind * e)
    sched = GapSchedule(pf, 0.5, "power")
    for lb in bound_tL(sched, GRID, 0, samples=200):
        assert lb.empirical_upper >= math.expm1(lb.eps) * (1 - 1e-12)
        assert lb.dominates


def test_empirical_gap_examples():
    fa = build_family(fx.fix_a(1))
    g = empirical_gap(fa, 0.1, 0.5)
    assert g.lam == pytest.approx(math.exp(0.1) + 1) and g.second == pytest.approx(0, abs=1e-12)
    assert g.matrix_gap == pytest.approx(math.exp(0.1) + 1)
    golden = empirical_gap(build_family(fx.fix_b(1)), 1e-12, 0.5)
    assert golden.second == pytest.approx(2 / (1 + math.sqrt(5)), abs=1e-9)
    th = [1 - e ** (1 / 8) for e in (1e-4, 1e-8, 1e-16)]
    bounds = [empirical_gap(fa, e, t).gap_bound for e, t in zip((1e-4, 1e-8, 1e-16), th)]
    assert bounds[0] > bounds[1] > bounds[2]


@pytest.mark.parametrize("make", [fx.fix_a, fx.fix_b], ids=["FIX-A", "FIX-B"])
def test_gapfree_check(make):
    n = 2
    rep = gapfree_expansion_check(GapSchedule(make(n), 0.5, "power"), GRID, samples=100)
    assert rep.criterion_pass and rep.diagnostics_vanish and rep.dominance
    assert rep.agreement == "criterion met; remainders vanish"
    for k in range(n + 1):
        assert rep.product_slopes[k] >= (k + 1) / (n + 2) - 0.1


def test_schedule_validation():
    with pytest.raises(AuditError):
        GapSchedule(fx.fix_a(1), 0.5, "linear")
    assert GapSchedule(fx.fix_a(1), 0.5, "power").check_monotone(GRID)
