"""Truncated power series (jets) in the perturbation parameter.

A :class:`Jet` of order ``n`` holds the coefficients ``c_0 .. c_n`` of
``c_0 + c_1*eps + ... + c_n*eps**n``.  Coefficients may be scalars (float or
mpf), numpy vectors (values of a locally constant function, combined
pointwise) or numpy matrices (operators, applied to vector coefficients).
Orders never mix silently: combining jets of different order is an error.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from . import _numeric as num


class JetError(ValueError):
    """Order mismatch or incompatible coefficient spaces."""


def _is_operator(c) -> bool:
    return isinstance(c, np.ndarray) and c.ndim == 2


def _prod(a, b):
    if _is_operator(a):
        if isinstance(b, np.ndarray) and b.ndim == 2:
            return a @ b
        if isinstance(b, np.ndarray) and b.ndim == 1:
            if a.shape[1] != b.shape[0]:
                raise JetError(f"operator of shape {a.shape} cannot act on length {b.shape[0]}")
            return a @ b
        return a * b
    if _is_operator(b):
        if isinstance(a, np.ndarray):
            raise JetError("a function coefficient cannot multiply an operator from the left")
        return a * b
    if isinstance(a, np.ndarray) and isinstance(b, np.ndarray) and a.shape != b.shape:
        raise JetError(f"incompatible coefficient shapes {a.shape} and {b.shape}")
    return a * b


class Jet:
    """Truncated power series of fixed order."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence):
        if len(coeffs) == 0:
            raise JetError("a jet needs at least one coefficient")
        shapes = {np.shape(c) for c in coeffs}
        if len(shapes) > 1:
            raise JetError(f"coefficients live in different spaces: {sorted(shapes)}")
        self.coeffs = tuple(coeffs)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def constant(cls, value, order: int) -> "Jet":
        zero = value * 0
        return cls([value] + [zero] * order)

    @classmethod
    def variable(cls, value, order: int) -> "Jet":
        """The jet of ``value + eps``."""
        if order == 0:
            return cls([value])
        return cls([value, value * 0 + 1] + [value * 0] * (order - 1))

    def __getitem__(self, k):
        return self.coeffs[k]

    def __len__(self):
        return len(self.coeffs)

    def __iter__(self):
        return iter(self.coeffs)

    def __repr__(self):
        return f"Jet({list(self.coeffs)!r})"

    def _check(self, other: "Jet"):
        if not isinstance(other, Jet):
            raise TypeError(f"expected Jet, got {type(other).__name__}")
        if other.order != self.order:
            raise JetError(f"order mismatch: {self.order} vs {other.order}")

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return Jet([a + b for a, b in zip(self.coeffs, other.coeffs)])
        return Jet([self.coeffs[0] + other] + list(self.coeffs[1:]))

    __radd__ = __add__

    def __neg__(self):
        return Jet([-a for a in self.coeffs])

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return jet_mul(self, other)
        return Jet([a * other for a in self.coeffs])

    def __rmul__(self, other):
        if isinstance(other, Jet):
            return jet_mul(other, self)
        return Jet([other * a for a in self.coeffs])

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return jet_mul(self, jet_reciprocal(other))
        return Jet([a / other for a in self.coeffs])

    def __rtruediv__(self, other):
        return jet_reciprocal(self) * other

    def __call__(self, eps):
        """Evaluate the truncated polynomial at ``eps``."""
        acc = self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            acc = acc * eps + c
        return acc

    def allclose(self, other, rtol=1e-12, atol=1e-12) -> bool:
        self._check(other)
        return all(
            np.allclose(num.to_float(np.asarray(a)), num.to_float(np.asarray(b)), rtol=rtol, atol=atol)
            for a, b in zip(self.coeffs, other.coeffs)
        )


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Degree-truncated Cauchy product."""
    a._check(b)
    n = a.order
    out = []
    for k in range(n + 1):
        acc = _prod(a.coeffs[0], b.coeffs[k])
        for i in range(1, k + 1):
            acc = acc + _prod(a.coeffs[i], b.coeffs[k - i])
        out.append(acc)
    return Jet(out)


def _nonzero(c) -> bool:
    return bool(np.all(np.asarray(num.to_float(c) if num.is_mp(c) else c) != 0))


def jet_reciprocal(a: Jet) -> Jet:
    c0 = a.coeffs[0]
    if not _nonzero(c0):
        raise JetError("reciprocal of a jet with zero constant term")
    inv0 = 1 / c0
    out = [inv0]
    for k in range(1, a.order + 1):
        acc = a.coeffs[1] * out[k - 1]
        for j in range(2, k + 1):
            acc = acc + a.coeffs[j] * out[k - j]
        out.append(-inv0 * acc)
    return Jet(out)


def jet_exp(a: Jet) -> Jet:
    """exp of a jet; coefficients combine pointwise for vector jets."""
    out = [num.exp(a.coeffs[0])]
    for k in range(1, a.order + 1):
        acc = a.coeffs[1] * out[k - 1]
        for j in range(2, k + 1):
            acc = acc + j * a.coeffs[j] * out[k - j]
        out.append(acc / k)
    return Jet(out)


def jet_log(a: Jet) -> Jet:
    c0 = a.coeffs[0]
    if not np.all(np.asarray(num.to_float(c0) if num.is_mp(c0) else c0) > 0):
        raise JetError("log of a jet with nonpositive constant term")
    out = [num.log(c0)]
    for k in range(1, a.order + 1):
        acc = a.coeffs[k]
        for j in range(1, k):
            acc = acc - (j / k) * out[j] * a.coeffs[k - j]
        out.append(acc / c0)
    return Jet(out)


def jet_compose_scalar(outer: Sequence, inner: Jet) -> Jet:
    """Compose a function with a jet given its Taylor coefficients.

    ``outer[j]`` must be ``f^(j)(c_0) / j!`` where ``c_0`` is the constant term
    of ``inner``, for ``j = 0 .. inner.order``.
    """
    if len(outer) != inner.order + 1:
        raise JetError(f"need {inner.order + 1} Taylor coefficients, got {len(outer)}")
    zero = inner.coeffs[0] * 0
    delta = Jet([zero] + list(inner.coeffs[1:]))
    acc = Jet.constant(outer[-1] + zero, inner.order)
    for c in reversed(outer[:-1]):
        acc = jet_mul(acc, delta) + c
    return acc


def taylor_coefficients(name: str, x0, order: int) -> list:
    """Taylor coefficients ``f^(j)(x0)/j!`` of a few elementary functions."""
    if name == "log":
        return [num.log(x0)] + [(-1) ** (j + 1) / (j * x0**j) for j in range(1, order + 1)]
    if name == "exp":
        e = num.exp(x0)
        return [e / math.factorial(j) for j in range(order + 1)]
    if name == "square":
        return ([x0 * x0, 2 * x0, x0 * 0 + 1] + [x0 * 0] * order)[: order + 1]
    if name == "identity":
        return ([x0, x0 * 0 + 1] + [x0 * 0] * order)[: order + 1]
    if name == "inverse_square":
        return [(-1) ** j * (j + 1) / x0 ** (j + 2) for j in range(order + 1)]
    raise KeyError(name)


def jet_from_callable(f: Callable, order: int, dps: int = 40) -> Jet:
    """Taylor jet of a scalar analytic function of eps at 0 (mpmath-based)."""
    import mpmath

    with mpmath.workdps(dps):
        coeffs = mpmath.taylor(lambda e: f(e), 0, order)
    return Jet([float(c) for c in coeffs])
