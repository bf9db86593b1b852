import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perturbex.series import (
    Jet,
    JetError,
    jet_compose_scalar,
    jet_exp,
    jet_from_callable,
    jet_log,
    jet_mul,
    jet_reciprocal,
    taylor_coefficients,
)

coef = st.floats(-3, 3, allow_nan=False)


def jets(order=3, c0=coef):
    return st.builds(lambda a, rest: Jet([a] + rest), c0, st.lists(coef, min_size=order, max_size=order))


def close(a, b, tol=1e-12):
    return np.allclose(list(a), list(b), rtol=tol, atol=tol)


def test_mul_examples():
    assert close(jet_mul(Jet([1, 1, 0]), Jet([1, -1, 0])), [1, 0, -1])
    assert close(jet_mul(Jet([1, 1]), Jet([1, 0])), [1, 1])
    e = Jet([1 / math.factorial(k) for k in range(4)])
    assert close(jet_mul(e, e), [1, 2, 2, 4 / 3])


def test_reciprocal_examples():
    assert close(jet_reciprocal(Jet([1, 1, 0])), [1, -1, 1])
    assert close(jet_reciprocal(Jet([2.0, 0.0])), [0.5, 0])
    e = Jet([1 / math.factorial(k) for k in range(4)])
    assert close(jet_reciprocal(e), [1, -1, 0.5, -1 / 6])


def test_reciprocal_zero_constant():
    with pytest.raises(JetError):
        jet_reciprocal(Jet([0.0, 1.0]))


def test_exp_log_examples():
    assert close(jet_exp(Jet([0.0, 1, 0, 0])), [1, 1, 0.5, 1 / 6])
    assert close(jet_log(Jet([1.0, 1, 0, 0])), [0, 1, -0.5, 1 / 3])
    assert close(jet_exp(Jet([0.0, 1, 1])), [1, 1, 1.5])


def test_log_needs_positive_constant():
    with pytest.raises(JetError):
        jet_log(Jet([-1.0, 1.0]))


def test_compose_examples():
    x = Jet([1.0, 1.0, 0.0])
    assert close(jet_compose_scalar(taylor_coefficients("square", 1.0, 2), x), [1, 2, 1])
    y = Jet([0.3, -2.0, 5.0])
    assert close(jet_compose_scalar(taylor_coefficients("identity", 0.3, 2), y), y)
    z = Jet([1 / 3, 1.0])
    assert close(jet_compose_scalar(taylor_coefficients("log", 1 / 3, 1), z), [math.log(1 / 3), 3])


def test_compose_agrees_with_exp_and_log():
    a = Jet([0.7, 0.2, -1.1, 0.4])
    assert close(jet_compose_scalar(taylor_coefficients("exp", 0.7, 3), a), jet_exp(a))
    assert close(jet_compose_scalar(taylor_coefficients("log", 0.7, 3), a), jet_log(a))


def test_compose_inverse_square():
    a = Jet([2.0, 1.0, 0.0])
    # 1/(2+e)^2 = 1/4 - e/4 + 3e^2/16
    assert close(jet_compose_scalar(taylor_coefficients("inverse_square", 2.0, 2), a), [0.25, -0.25, 3 / 16])


def test_mixed_orders_rejected():
    with pytest.raises(JetError):
        Jet([1.0, 2.0]) + Jet([1.0, 2.0, 3.0])
    with pytest.raises(JetError):
        jet_mul(Jet([1.0]), Jet([1.0, 0.0]))


def test_operator_coefficients():
    m = Jet([np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]])])
    v = Jet([np.array([1.0, 2.0]), np.zeros(2)])
    out = jet_mul(m, v)
    assert np.allclose(out[0], [1, 2]) and np.allclose(out[1], [2, 1])


def test_division_is_mul_by_reciprocal():
    a, b = Jet([1.0, 2.0, 3.0]), Jet([2.0, -1.0, 0.5])
    assert close(a / b, jet_mul(a, jet_reciprocal(b)))


@settings(max_examples=60, deadline=None)
@given(jets(), jets(), jets())
def test_ring_axioms(a, b, c):
    assert jet_mul(a, b).allclose(jet_mul(b, a), rtol=1e-12, atol=1e-9)
    assert jet_mul(jet_mul(a, b), c).allclose(jet_mul(a, jet_mul(b, c)), rtol=1e-12, atol=1e-9)


nonzero_c0 = st.floats(0.1, 10) | st.floats(-10, -0.1)


@settings(max_examples=100, deadline=None)
@given(jets(c0=nonzero_c0))
def test_reciprocal_property(a):
    unit = jet_mul(a, jet_reciprocal(a))
    assert close(unit, [1, 0, 0, 0], tol=1e-12 * max(1.0, max(abs(x) for x in a) ** 4 / abs(a[0]) ** 4))


@settings(max_examples=60, deadline=None)
@given(jets(c0=st.floats(0.2, 5)))
def test_exp_log_inverse(a):
    b = jet_exp(jet_log(a))
    scale = max(abs(x) for x in a)
    assert close(b, a, tol=1e-12 * max(1.0, (scale / a[0]) ** 3 * scale))
    c = Jet([min(max(x, -1.0), 1.0) for x in a])
    assert close(jet_log(jet_exp(c)), c, tol=1e-12)


@pytest.mark.parametrize("f", [mpmath.exp, lambda e: mpmath.log(1 + 2 * e), lambda e: 1 / (3 - e)])
def test_jet_remainder_order(f):
    n = 3
    jet = jet_from_callable(f, n)
    r1, r2 = (abs(float(f(mpmath.mpf(e))) - jet(e)) for e in (1e-2, 1e-3))
    # constant fitted from the first sample covers the second
    c = r1 / 1e-2 ** (n + 1)
    assert r2 <= 2 * c * 1e-3 ** (n + 1) + 1e-15


def test_evaluate_and_constant():
    j = Jet.variable(2.0, 3)
    assert j(0.5) == 2.5
    assert list(Jet.constant(1.5, 2)) == [1.5, 0.0, 0.0]
