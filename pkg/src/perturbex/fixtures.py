"""Reference instances with closed-form oracles, plus random and boundary families."""

from __future__ import annotations

import math

import mpmath
import numpy as np

from . import _numeric as num
from .gdms import EdgeMap, GdmsSystem
from .perturb import OperatorFamily, matrix_family
from .shift import DepthFn, ShiftSpace, build_shift
from .thermo import PotentialFamily

FULL_2 = [[1, 1], [1, 1]]
GOLDEN = [[1, 1], [1, 0]]


def _fix(transition, n: int, label: str) -> PotentialFamily:
    s = build_shift(["1", "2"], transition)
    zero = DepthFn.constant(s, 1, 0.0)
    coeffs = [DepthFn(s, 1, [1.0, 0.0])] + [zero] * (n - 1)
    return PotentialFamily(s, zero, coeffs, label=label)


def fix_a(n: int = 4) -> PotentialFamily:
    """Full 2-shift, ``phi = 0``, ``phi_1 = 1_[1]``: ``lambda(eps) = e^eps + 1``."""
    return _fix(FULL_2, n, "FIX-A")


def fix_b(n: int = 3) -> PotentialFamily:
    """Golden-mean shift, ``phi = 0``, ``phi_1 = 1_[1]``: ``lambda^2 = e^eps (lambda + 1)``."""
    return _fix(GOLDEN, n, "FIX-B")


def fix_c(n: int = 3) -> GdmsSystem:
    """Two affine maps of ratio ``1/3 + eps`` on [0, 1]: ``s(eps) = log 2 / -log(1/3 + eps)``."""
    return GdmsSystem(
        ["v"],
        [("v", "v"), ("v", "v")],
        [EdgeMap.affine(["1/3", 1], [0]), EdgeMap.affine(["1/3", 1], ["2/3"])],
        {"v": (0, 1)},
        edge_labels=("1", "2"),
        order=n,
    )


def fix_c_dimension(eps):
    """Closed form ``log 2 / -log(1/3 + eps)`` (mpmath-aware)."""
    e = mpmath.mpf(eps)
    return mpmath.log(2) / -mpmath.log(mpmath.mpf(1) / 3 + e)


def fix_c_asymmetric(n: int = 2) -> GdmsSystem:
    """Ratios ``1/3 + eps`` and ``1/3``: Gibbs weights move with eps."""
    return GdmsSystem(
        ["v"],
        [("v", "v"), ("v", "v")],
        [EdgeMap.affine(["1/3", 1], [0]), EdgeMap.affine(["1/3"], ["2/3"])],
        {"v": (0, 1)},
        edge_labels=("1", "2"),
        order=n,
    )


def mobius_system(n: int = 2) -> GdmsSystem:
    """Two Moebius branches with a nonconstant physical potential."""
    return GdmsSystem(
        ["v"],
        [("v", "v"), ("v", "v")],
        [
            EdgeMap.mobius([1, "1/2"], [0], ["1/2"], [2]),
            EdgeMap.mobius([1], [2], [1], [4, "1/3"]),
        ],
        {"v": (0, 1)},
        edge_labels=("1", "2"),
        order=n,
    )


def sqrt_family() -> OperatorFamily:
    """``L(eps) = L + eps^{1/2} B`` on the golden-mean operator, declared with ``n = 1``, ``L_1 = 0``.

    Not expandable to order 1: ``~lambda_1(eps) ~ eps^{-1/2} nu(B h)``.
    """
    base = np.array([[1.0, 1.0], [1.0, 0.0]])
    b = np.array([[1.0, 0.5], [0.2, 0.0]])

    def ev(e):
        if isinstance(e, mpmath.mpf):
            return num.to_mp(base) + mpmath.sqrt(e) * num.to_mp(b)
        return base + math.sqrt(e) * b

    return matrix_family(base, [0 * base], ev, label="sqrt")


def sqrt_potential_family() -> PotentialFamily:
    """``phi(eps) = eps^{1/2} 1_[1]`` on the golden mean, declared with ``n = 1``, ``phi_1 = 0``."""
    s = build_shift(["1", "2"], GOLDEN)
    zero = DepthFn.constant(s, 1, 0.0)
    ind = np.array([1.0, 0.0])

    def exact(e):
        if isinstance(e, mpmath.mpf):
            return num.to_mp(ind) * mpmath.sqrt(e)
        return ind * math.sqrt(e)

    return PotentialFamily(s, zero, [zero], exact=exact, label="sqrt-potential")


def zero_family(transition=GOLDEN, n: int = 2) -> PotentialFamily:
    s = build_shift(["1", "2"], transition)
    zero = DepthFn.constant(s, 1, 0.0)
    return PotentialFamily(s, zero, [zero] * n, label="zero")


def random_shift(rng: np.random.Generator, k: int) -> ShiftSpace:
    """Random primitive 0/1 matrix on k symbols."""
    while True:
        a = (rng.random((k, k)) < 0.7).astype(int)
        try:
            s = build_shift(k, a)
        except ValueError:
            continue
        if s.size == k and s.primitive:
            return s


def random_family(rng: np.random.Generator, n: int = 3) -> PotentialFamily:
    """2-3 states, depth 1 or 2, random potential and coefficients."""
    k = int(rng.integers(2, 4))
    depth = int(rng.integers(1, 3))
    s = random_shift(rng, k)
    size = len(s.words(depth))
    phi = DepthFn(s, depth, rng.normal(0, 0.5, size))
    coeffs = [DepthFn(s, depth, rng.normal(0, 1, size)) for _ in range(n)]
    return PotentialFamily(s, phi, coeffs, label="random")


def random_families(count: int = 50, n: int = 3, seed: int = 20240601) -> list:
    rng = np.random.default_rng(seed)
    return [random_family(rng, n) for _ in range(count)]
