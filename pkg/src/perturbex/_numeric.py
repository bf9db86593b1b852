"""Dtype-dispatching linear algebra shared by the float64 and mpmath paths.

Arrays are either ``float64`` numpy arrays or ``object`` arrays holding
``mpmath.mpf`` values.  Every helper here accepts both and returns the same
kind it was given, so the expansion engine can be run unchanged in extended
precision when remainders are evaluated.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np

#: Decimal digits used for remainder evaluations unless overridden.
DEFAULT_DPS = 50

# mpf arithmetic happens outside any local context (inside numpy object
# arrays), so the working precision has to be set globally.
if mpmath.mp.dps < DEFAULT_DPS:
    mpmath.mp.dps = DEFAULT_DPS


class PerronError(ArithmeticError):
    """Raised when a Perron eigenpair cannot be extracted."""


def is_mp(a) -> bool:
    if isinstance(a, np.ndarray):
        return a.dtype == object
    return isinstance(a, mpmath.mpf)


def to_mp(a):
    """Convert floats (scalars or arrays) to mpf, exactly."""
    if isinstance(a, np.ndarray):
        if a.dtype == object:
            return a
        out = np.empty(a.shape, dtype=object)
        flat = out.reshape(-1)
        for i, v in enumerate(a.reshape(-1)):
            flat[i] = mpmath.mpf(float(v))
        return out
    return mpmath.mpf(a)


def to_float(a):
    if isinstance(a, np.ndarray):
        if a.dtype == object:
            return np.array([float(v) for v in a.reshape(-1)]).reshape(a.shape)
        return a.astype(float)
    return float(a)


def exp(a):
    if isinstance(a, np.ndarray) and a.dtype == object:
        return np.array([mpmath.exp(v) for v in a.reshape(-1)], dtype=object).reshape(a.shape)
    if isinstance(a, mpmath.mpf):
        return mpmath.exp(a)
    return np.exp(a)


def log(a):
    if isinstance(a, np.ndarray) and a.dtype == object:
        return np.array([mpmath.log(v) for v in a.reshape(-1)], dtype=object).reshape(a.shape)
    if isinstance(a, mpmath.mpf):
        return mpmath.log(a)
    if isinstance(a, np.ndarray):
        return np.log(a)
    return math.log(a)


def sqrt(a):
    if isinstance(a, mpmath.mpf):
        return mpmath.sqrt(a)
    return math.sqrt(a)


def eye(n: int, like=None):
    e = np.eye(n)
    return to_mp(e) if like is not None and is_mp(like) else e


def _mpmat(a: np.ndarray):
    return mpmath.matrix(a.tolist())


def _from_mpmat(m, shape) -> np.ndarray:
    return np.array(m.tolist(), dtype=object).reshape(shape)


def inv(a: np.ndarray) -> np.ndarray:
    if is_mp(a):
        return _from_mpmat(mpmath.inverse(_mpmat(a)), a.shape)
    return np.linalg.inv(a)


def solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if is_mp(a) or is_mp(b):
        a, b = to_mp(a), to_mp(b)
        return _from_mpmat(mpmath.lu_solve(_mpmat(a), mpmath.matrix(b.tolist())), b.shape)
    return np.linalg.solve(a, b)


def cond(a: np.ndarray) -> float:
    return float(np.linalg.cond(to_float(a)))


def max_abs(a) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(max(abs(v) for v in a.reshape(-1)))


def perron_pair(m: np.ndarray, simple_tol: float = 1e-8):
    """Return ``(lam, right, left)`` for the Perron root of a nonnegative matrix.

    Vectors are real and positive but not normalised.  The float path takes
    the eigenvalue of maximal real part from a dense eigendecomposition; the
    mpmath path refines that estimate by shifted inverse iteration.
    """
    mf = to_float(m)
    w, v = np.linalg.eig(mf)
    idx = int(np.argmax(w.real))
    lam = float(w[idx].real)
    if not lam > 0:
        raise PerronError(f"leading eigenvalue {lam} is not positive")
    close = np.sum(np.abs(w - w[idx]) <= simple_tol * lam)
    if close > 1:
        raise PerronError(f"Perron root {lam} is not simple (multiplicity {close})")
    right = v[:, idx].real
    wl, vl = np.linalg.eig(mf.T)
    left = vl[:, int(np.argmin(np.abs(wl - w[idx])))].real
    right = right * np.sign(right.sum())
    left = left * np.sign(left.sum())
    if not is_mp(m):
        return lam, right, left
    return _refine_mp(m, lam, right, left)


def _refine_mp(m, lam, right, left, iters: int = 8):
    n = m.shape[0]
    sigma = mpmath.mpf(lam) * (1 + mpmath.mpf(10) ** -12)
    shifted = m - sigma * eye(n, like=m)
    lu = _mpmat(shifted)
    lut = _mpmat(shifted.T.copy())
    x = to_mp(right)
    y = to_mp(left)
    for _ in range(iters):
        x = _from_mpmat(mpmath.lu_solve(lu, mpmath.matrix(x.tolist())), (n,))
        x = x / sum(x)
        y = _from_mpmat(mpmath.lu_solve(lut, mpmath.matrix(y.tolist())), (n,))
        y = y / sum(y)
    lam_mp = (y @ (m @ x)) / (y @ x)
    return lam_mp, x, y


def compositions(k: int, parts: int | None = None):
    """Yield ordered tuples of positive integers summing to ``k``."""
    if k == 0:
        if parts in (None, 0):
            yield ()
        return
    if parts is not None and parts <= 0:
        return
    for first in range(1, k + 1):
        rest = None if parts is None else parts - 1
        for tail in compositions(k - first, rest):
            yield (first,) + tail
