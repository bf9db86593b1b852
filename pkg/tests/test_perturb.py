import math

import mpmath
import numpy as np
import pytest

from perturbex import fixtures as fx
from perturbex.perturb import (
    FamilyError,
    closed_forms_n012,
    convergence_diagnostics,
    expand,
    expand_eigenfunction,
    perturbed_data,
    polynomial_family,
    remainder_kappa_g,
    remainder_lambda,
    remainders,
    verdict,
)
from perturbex.thermo import build_family

PHI = (1 + math.sqrt(5)) / 2
ONE = np.array([1.0, 0.0])


@pytest.fixture(scope="module")
def fix_a():
    return build_family(fx.fix_a(3))


@pytest.fixture(scope="module")
def fix_b():
    return build_family(fx.fix_b(3))


def test_fix_a_coefficients(fix_a):
    res = expand(fix_a)
    assert [float(x) for x in res.lam] == pytest.approx([2, 1, 0.5, 1 / 6], abs=1e-12)
    assert float(res.kappa[1] @ ONE) == pytest.approx(0.25, abs=1e-12)
    assert float(res.nu[1] @ ONE) == pytest.approx(0.25, abs=1e-12)
    for k in range(1, 4):
        assert np.allclose(res.g[k], 0, atol=1e-13)
        assert np.allclose(res.h[k], 0, atol=1e-13)
        assert np.allclose(res.nu[k], res.kappa[k], atol=1e-13)


def test_fix_b_lambda_1(fix_b):
    assert float(expand(fix_b).lam[1]) == pytest.approx(PHI**2 / math.sqrt(5), abs=1e-12)


def test_fix_b_g1_finite_difference(fix_b):
    res = expand(fix_b)
    d = 1e-4
    fd = (perturbed_data(fix_b, d).g - perturbed_data(fix_b, -d).g) / (2 * d)
    assert np.abs(fd - res.g[1]).max() < 1e-3
    assert abs(fix_b.base.nu @ res.g[1]) < 1e-14


def test_routes_and_normalizations(fix_b):
    res = expand(fix_b)
    lam2, g = expand_eigenfunction(fix_b)
    for k in range(4):
        assert float(lam2[k]) == pytest.approx(float(res.lam[k]), rel=1e-11)
    h0 = res.h[0]
    for k in range(1, 4):
        assert abs(res.kappa[k] @ h0) < 1e-11
        assert abs(res.nu[0] @ res.g[k]) < 1e-11
        assert abs(res.nu[k].sum()) < 1e-11
        assert abs(sum(res.nu[i] @ res.h[k - i] for i in range(k + 1))) < 1e-11


def test_lambda_1_central_difference(fix_b):
    d = 1e-5
    fd = (perturbed_data(fix_b, d).lam - perturbed_data(fix_b, -d).lam) / (2 * d)
    assert float(fd) == pytest.approx(float(expand(fix_b).lam[1]), rel=1e-6)


def test_closed_forms(fix_a, fix_b):
    assert closed_forms_n012(fix_a)["lambda_1"] == pytest.approx(1)
    assert float(closed_forms_n012(fix_a)["kappa_1"] @ ONE) == pytest.approx(0.25)
    assert closed_forms_n012(fix_b)["lambda_1"] == pytest.approx(1.1708204, abs=1e-7)
    with pytest.raises(FamilyError):
        closed_forms_n012(build_family(fx.fix_a(1)))


def test_remainder_examples():
    fam = build_family(fx.fix_a(2))
    e = 1e-2
    direct = remainder_lambda(fam, e, "direct")
    m = mpmath.mpf(e)
    assert float(direct[2]) == pytest.approx(float((mpmath.exp(m) - 1 - m - m * m / 2) / m**2), rel=1e-12)
    assert float(direct[0]) == pytest.approx(math.expm1(e), rel=1e-12)
    formula = remainder_lambda(fam, e, "formula")
    for d, f in zip(direct, formula):
        assert abs(float(d) - float(f)) <= 1e-9 * abs(float(d))
    kap, g = remainder_kappa_g(fam, 0.1, ONE, "formula")
    assert kap[0] == pytest.approx(math.exp(0.1) / (math.exp(0.1) + 1) - 0.5, rel=1e-9)
    for v in g:
        assert np.allclose(v, 0, atol=1e-15)


@pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3])
def test_remainder_identities_fix_b(fix_b, eps):
    mm = remainders(fix_b.lift(), eps).max_mismatch()
    assert max(mm.values()) <= 1e-9


def test_diagnostics_examples(fix_a):
    fam = build_family(fx.fix_a(2))
    d = convergence_diagnostics(fam, [1e-1, 1e-2, 1e-3, 1e-4])
    assert 0.8 <= d.slopes["lambda_2"] <= 1.2
    assert d.verdicts["lambda_2"] == "vanishing"
    zero = convergence_diagnostics(build_family(fx.zero_family()), [1e-1, 1e-2, 1e-3, 1e-4])
    assert max(max(m) for m in zero.magnitudes.values()) <= 1e-12
    assert all(v == "vanishing" for v in zero.verdicts.values())
    sq = convergence_diagnostics(fx.sqrt_family(), [1e-2, 5e-3, 2.5e-3, 1.25e-3])
    assert sq.verdicts["lambda_1"] == "stagnant"
    with pytest.raises(FamilyError, match="grid count"):
        convergence_diagnostics(fam, [1e-1, 1e-2])


def test_degenerate_zero_perturbation():
    res = expand(build_family(fx.zero_family(n=3)))
    for k in range(1, 4):
        assert res.lam[k] == 0 and not np.any(res.g[k]) and not np.any(res.nu[k])


def test_polynomial_family_and_lift():
    base = np.array([[1.0, 1.0], [1.0, 0.0]])
    l1 = np.array([[0.5, 0.0], [0.0, 0.2]])
    fam = polynomial_family(base, [l1])
    assert np.allclose(fam(0.1), base + 0.1 * l1)
    lifted = fam.lift()
    assert lifted.is_mp and isinstance(lifted(mpmath.mpf("0.1"))[0, 0], mpmath.mpf)
    assert np.allclose(np.asarray(fam.tilde_L(0.1, 1), float), 0)


def test_verdict_rule():
    grid = [1e-1, 1e-2, 1e-3, 1e-4]
    assert verdict(grid, [1e-1, 1e-2, 1e-3, 1e-4]) == "vanishing"
    assert verdict(grid, [1, 1, 1, 1]) == "stagnant"
    assert verdict(grid, [0, 0, 0, 0]) == "vanishing"
