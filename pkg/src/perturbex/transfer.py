"""Ruelle operators on depth-m locally constant functions and their RPF data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _numeric as num
from .shift import DepthFn, ShiftError, ShiftSpace, refine


class TransferOp:
    """Square matrix acting on depth-m functions: ``(L f).values = matrix @ f.values``.

    ``weights`` holds ``exp(phi)`` per admissible word when the operator is a
    Ruelle operator; the matrix is then ``routing * weights[None, :]``.
    """

    __slots__ = ("shift", "depth", "matrix", "weights")

    def __init__(self, shift: ShiftSpace, depth: int, matrix: np.ndarray, weights=None):
        n = len(shift.words(depth))
        if matrix.shape != (n, n):
            raise ShiftError(f"depth-{depth} operator must be {n}x{n}, got {matrix.shape}")
        self.shift = shift
        self.depth = depth
        self.matrix = matrix
        self.weights = weights

    def __call__(self, f: DepthFn) -> DepthFn:
        if f.depth > self.depth:
            raise ShiftError(f"depth-{f.depth} function is outside the depth-{self.depth} space")
        return DepthFn(self.shift, self.depth, self.matrix @ refine(f, self.depth).values)

    def __matmul__(self, other):
        if isinstance(other, DepthFn):
            return self(other)
        return self.matrix @ other

    def multiply_by(self, values) -> "TransferOp":
        """The operator ``f -> L(F f)`` for a depth-m function F."""
        return TransferOp(self.shift, self.depth, self.matrix * np.asarray(values)[None, :])


def ruelle_matrix(shift: ShiftSpace, depth: int, phi_values) -> np.ndarray:
    """Matrix of the Ruelle operator of a depth-``depth`` potential (float or mpf)."""
    return shift.routing(depth) * num.exp(np.asarray(phi_values))[None, :]


def build_ruelle(shift: ShiftSpace, phi: DepthFn, min_depth: int = 1) -> TransferOp:
    """Ruelle operator of ``phi`` on depth-max(phi.depth, min_depth) functions.

    The action is exact: for a depth-m potential the depth-m space is invariant.
    Pass ``min_depth=2`` to refine depth-1 potentials to a two-symbol layout.
    """
    if phi.shift != shift:
        raise ShiftError("potential lives on a different shift")
    m = max(phi.depth, min_depth)
    vals = refine(phi, m).values
    w = num.exp(vals)
    return TransferOp(shift, m, shift.routing(m) * w[None, :], weights=w)


class SpectralError(ArithmeticError):
    pass


@dataclass
class SpectralTriplet:
    """Perron data of a transfer operator plus projector and resolvents.

    ``nu`` is a row vector of cylinder weights (``nu @ 1 == 1``) and ``h`` a
    positive column vector with ``nu @ h == 1``.
    """

    op: TransferOp | None
    matrix: np.ndarray
    lam: float
    h: np.ndarray
    nu: np.ndarray
    projector: np.ndarray
    resolvent: np.ndarray
    reduced: np.ndarray
    condition: float
    margin: float

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def nu_apply(self, f) -> float:
        """``nu(f)`` for a DepthFn (refined or extended to a common depth) or a vector."""
        if isinstance(f, DepthFn):
            if self.op is None:
                raise ShiftError("triplet has no shift context")
            if f.depth <= self.op.depth:
                return self.nu @ refine(f, self.op.depth).values
            w = cylinder_weights(self, f.depth)
            return w @ f.values
        return self.nu @ f

    def h_fn(self) -> DepthFn:
        return DepthFn(self.op.shift, self.op.depth, self.h)

    def residuals(self) -> dict:
        lam = self.lam
        m = self.matrix
        n = self.size
        eye = num.eye(n, like=m)
        return {
            "eigen_right": num.max_abs(m @ self.h - lam * self.h),
            "eigen_left": num.max_abs(self.nu @ m - lam * self.nu),
            "nu_h": abs(float(self.nu @ self.h) - 1.0),
            "nu_one": abs(float(sum(self.nu)) - 1.0),
            "S_h": num.max_abs(self.reduced @ self.h),
            "nu_S": num.max_abs(self.nu @ self.reduced),
            "S_resolvent_identity": num.max_abs(self.reduced @ (m - lam * eye) - (eye - self.projector)),
            "resolvent_inverse": num.max_abs((m - lam * self.projector - lam * eye) @ self.resolvent - eye),
        }


def spectral_triplet(op, simple_tol: float = 1e-8, cond_limit: float = 1e12) -> SpectralTriplet:
    """Extract ``(lam, h, nu)``, ``P = h (x) nu``, ``R_lam`` and ``S``.

    ``op`` is a :class:`TransferOp` or a bare nonnegative matrix (float or mpf).
    """
    if isinstance(op, TransferOp):
        if not op.shift.irreducible:
            raise SpectralError("shift is not irreducible")
        m = op.matrix
    else:
        m = np.asarray(op)
        op = None
    mf = num.to_float(m)
    if np.any(mf < 0) or not np.any(mf > 0):
        raise SpectralError("operator matrix must be entrywise nonnegative and nonzero")
    try:
        lam, right, left = num.perron_pair(m, simple_tol)
    except num.PerronError as exc:
        raise SpectralError(str(exc)) from exc
    if np.any(num.to_float(right) <= 0) or np.any(num.to_float(left) < 0):
        raise SpectralError("Perron vectors are not positive; operator is reducible on this space")
    nu = left / sum(left)
    h = right / (nu @ right)
    n = m.shape[0]
    eye = num.eye(n, like=m)
    proj = np.outer(h, nu)
    r = m - lam * proj
    shifted = r - lam * eye
    condition = num.cond(shifted)
    if condition > cond_limit:
        raise SpectralError(f"R - lam I is near-singular (condition number {condition:.3g})")
    resolvent = num.inv(shifted)
    reduced = resolvent @ (eye - proj)
    others = np.linalg.eigvals(num.to_float(r))
    margin = float(np.min(np.abs(others - float(lam))))
    return SpectralTriplet(op, m, lam, h, nu, proj, resolvent, reduced, condition, margin)


def pressure(shift: ShiftSpace, phi: DepthFn) -> float:
    return float(np.log(float(spectral_triplet(build_ruelle(shift, phi)).lam)))


def cylinder_weights(triplet: SpectralTriplet, depth: int) -> np.ndarray:
    """``nu([w])`` for every admissible word of length ``depth``.

    Shallower words are obtained by summing over extensions; deeper words use
    conformality, ``nu([a w]) = exp(phi(a w)) nu([w]) / lam``.
    """
    op = triplet.op
    if op is None or op.weights is None:
        raise ShiftError("cylinder weights need a Ruelle operator")
    shift, m = op.shift, op.depth
    if depth <= m:
        out = np.zeros(len(shift.words(depth)), dtype=triplet.nu.dtype)
        idx = shift.prefix_map(m, depth)
        for i, v in zip(idx, triplet.nu):
            out[i] = out[i] + v
        return out
    cur = triplet.nu
    for d in range(m, depth):
        words = shift.words(d + 1)
        tail = shift.words(d).position
        head = shift.words(m).position
        nxt = np.empty(len(words), dtype=cur.dtype)
        for i, w in enumerate(words.words):
            nxt[i] = op.weights[head[w[:m]]] * cur[tail[w[1:]]] / triplet.lam
        cur = nxt
    return cur


def gibbs_weights(triplet: SpectralTriplet, depth: int) -> np.ndarray:
    """Gibbs measure ``mu([w]) = integral of h over [w] w.r.t. nu``."""
    op = triplet.op
    m = op.depth
    if depth >= m:
        nu_w = cylinder_weights(triplet, depth)
        return triplet.h[op.shift.prefix_map(depth, m)] * nu_w
    full = triplet.h * triplet.nu
    out = np.zeros(len(op.shift.words(depth)), dtype=full.dtype)
    for i, v in zip(op.shift.prefix_map(m, depth), full):
        out[i] = out[i] + v
    return out


def gibbs_constant(triplet: SpectralTriplet, phi: DepthFn, depth: int) -> tuple[float, float]:
    """Extremes of ``mu([w]) / exp(-n log lam + S_n phi)`` over length-``depth`` words.

    The Birkhoff sum needs ``depth + m - 1`` symbols for a depth-m potential;
    the ratio is taken over every admissible extension.
    """
    shift = triplet.op.shift
    m = max(phi.depth, 1)
    mu = num.to_float(gibbs_weights(triplet, depth))
    pos = shift.words(depth).position
    lo, hi = np.inf, -np.inf
    loglam = float(np.log(float(triplet.lam)))
    pv = num.to_float(phi.values)
    ppos = shift.words(phi.depth).position
    for ext in shift.words(depth + m - 1).words:
        s = sum(pv[ppos[ext[k : k + phi.depth]]] for k in range(depth))
        ratio = mu[pos[ext[:depth]]] / np.exp(-depth * loglam + s)
        lo, hi = min(lo, ratio), max(hi, ratio)
    return float(lo), float(hi)


def gibbs_bound(triplet: SpectralTriplet, phi: DepthFn) -> float:
    """Depth-uniform constant c with ``c^-1 <= ratio <= c``.

    For words longer than the operator depth the ratio factors into a head
    term ``h(w[:m])`` and a tail term depending on the last m symbols and the
    extension, so bounding both extremes separately gives one c for all depths.
    """
    op = triplet.op
    shift, m = op.shift, op.depth
    d = max(m, 2)
    h = num.to_float(triplet.h)
    head = h[shift.prefix_map(d, m)] if d >= m else h
    pd = max(phi.depth, 1)
    nu_d = num.to_float(cylinder_weights(triplet, d))
    lam = float(triplet.lam)
    pv = num.to_float(phi.values)
    ppos = shift.words(phi.depth).position
    dpos = shift.words(d).position
    tails = []
    for ext in shift.words(d + pd - 1).words:
        w = ext[:d]
        s = sum(pv[ppos[ext[k : k + phi.depth]]] for k in range(d))
        # ratio over the head-stripped tail: nu([w]) lam^d / exp(S_d phi)
        tails.append(nu_d[dpos[w]] * lam**d / np.exp(s))
    hi = float(np.max(head)) * max(tails)
    lo = float(np.min(head)) * min(tails)
    for depth in range(1, d):
        a, b = gibbs_constant(triplet, phi, depth)
        lo, hi = min(lo, a), max(hi, b)
    return float(max(hi, 1.0 / lo, 1.0))


def power_iteration(m: np.ndarray, iters: int = 2000, tol: float = 1e-14) -> float:
    """Perron root by power iteration; cross-check for primitive matrices."""
    x = np.ones(m.shape[0])
    lam = 0.0
    for _ in range(iters):
        y = m @ x
        new = float(y.sum() / x.sum())
        x = y / np.linalg.norm(y)
        if abs(new - lam) <= tol * abs(new):
            return new
        lam = new
    return lam
