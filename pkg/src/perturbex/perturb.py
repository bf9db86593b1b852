"""Expansion coefficients and exact remainders of perturbed Perron data.

An :class:`OperatorFamily` describes ``L(eps) = L + L_1 eps + ... + L_n eps^n
+ ~L_n(eps) eps^n`` on a finite space.  :func:`expand` runs the inductive
recursions for ``lambda_k, kappa_k, g_k`` and the derived ``nu_k, h_k``;
:func:`remainders` evaluates the exact remainder identities at a given eps
against the true eigendata of ``L(eps)``.

Functionals (``kappa_k``, ``nu_k``) are row vectors of weights; functions
(``g_k``, ``h_k``) are column vectors on the same index set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np

from . import _numeric as num
from .series import Jet, jet_reciprocal
from .transfer import SpectralTriplet, TransferOp, spectral_triplet

log = logging.getLogger(__name__)


class IdentityViolation(ArithmeticError):
    """Two computations that must agree exactly do not; an implementation fault."""


class FamilyError(ValueError):
    pass


def _close(a, b, rtol, atol=0.0) -> bool:
    a = num.to_float(np.asarray(a, dtype=object)) if num.is_mp(np.asarray(a)) else np.asarray(a, float)
    b = num.to_float(np.asarray(b, dtype=object)) if num.is_mp(np.asarray(b)) else np.asarray(b, float)
    return bool(np.all(np.abs(a - b) <= rtol * np.maximum(np.abs(a), np.abs(b)) + atol))


@dataclass
class OperatorFamily:
    """Base triplet, coefficient matrices ``L_1..L_n`` and an eps-evaluator.

    ``evaluator(eps)`` returns the matrix of ``L(eps)``; it must accept
    ``mpmath.mpf`` arguments when the family is lifted to extended precision.
    ``lifter`` optionally rebuilds the whole family in mpmath (coefficients
    included) so that nothing is rounded to float64 on the way.
    """

    base: SpectralTriplet
    coeffs: tuple
    evaluator: Callable
    lifter: Callable | None = None
    label: str = ""
    check_base: bool = True

    def __post_init__(self):
        self.coeffs = tuple(self.coeffs)
        n = self.base.size
        for j, c in enumerate(self.coeffs, 1):
            if np.shape(c) != (n, n):
                raise FamilyError(f"L_{j} has shape {np.shape(c)}, expected {(n, n)}")
        if self.check_base:
            zero = mpmath.mpf(0) if self.is_mp else 0.0
            e0 = np.asarray(self.evaluator(zero))
            if e0.shape != (n, n):
                raise FamilyError(f"evaluator returns shape {e0.shape}, expected {(n, n)}")
            if num.max_abs(e0 - self.base.matrix) > 1e-12:
                raise FamilyError("evaluator(0) differs from the base operator")

    @property
    def order(self) -> int:
        return len(self.coeffs)

    @property
    def matrix(self):
        return self.base.matrix

    @property
    def is_mp(self) -> bool:
        return num.is_mp(self.base.matrix)

    def __call__(self, eps):
        m = np.asarray(self.evaluator(eps))
        if self.is_mp and not num.is_mp(m):
            m = num.to_mp(m)
        return m

    def lift(self) -> "OperatorFamily":
        """The same family in mpmath arithmetic (``mp.dps`` digits)."""
        if self.is_mp:
            return self
        if self.lifter is not None:
            return self.lifter()
        op = self.base.op
        m = num.to_mp(self.base.matrix)
        if op is not None:
            w = None if op.weights is None else num.to_mp(op.weights)
            base = spectral_triplet(TransferOp(op.shift, op.depth, m, w))
        else:
            base = spectral_triplet(m)
        ev = self.evaluator
        return OperatorFamily(
            base,
            tuple(num.to_mp(c) for c in self.coeffs),
            lambda e: num.to_mp(np.asarray(ev(e))) if not num.is_mp(np.asarray(ev(e))) else np.asarray(ev(e)),
            label=self.label,
        )

    def truncated(self, n: int) -> "OperatorFamily":
        """Same operator path, expanded only to order ``n``."""
        if n > self.order:
            raise FamilyError(f"family has order {self.order} < {n}")
        lifter = None
        if self.lifter is not None:
            outer = self.lifter
            lifter = lambda: outer().truncated(n)  # noqa: E731
        return OperatorFamily(self.base, self.coeffs[:n], self.evaluator, lifter, self.label, check_base=False)

    def tilde_L(self, eps, j: int):
        """``~L_j(eps) = (L(eps) - L - L_1 eps - ... - L_j eps^j) / eps^j``."""
        if eps == 0:
            raise FamilyError("remainders are defined for eps != 0")
        acc = self(eps) - self.base.matrix
        p = 1
        for i in range(1, j + 1):
            p = p * eps
            acc = acc - self.coeffs[i - 1] * p
        return acc / p if j > 0 else acc


def matrix_family(base_matrix, coeffs: Sequence, evaluator: Callable, label: str = "") -> OperatorFamily:
    """Family on a bare nonnegative matrix (no shift context)."""
    return OperatorFamily(spectral_triplet(np.asarray(base_matrix)), tuple(coeffs), evaluator, label=label)


def polynomial_family(base_matrix, coeffs: Sequence, label: str = "") -> OperatorFamily:
    """``L(eps) = L + sum_j L_j eps^j`` exactly, so every ``~L_j`` vanishes at ``j = n``."""
    base_matrix = np.asarray(base_matrix)
    coeffs = tuple(np.asarray(c) for c in coeffs)

    def ev(e):
        acc = base_matrix if not isinstance(e, mpmath.mpf) else num.to_mp(base_matrix)
        p = 1
        for c in coeffs:
            p = p * e
            acc = acc + (num.to_mp(c) if isinstance(e, mpmath.mpf) else c) * p
        return acc

    return matrix_family(base_matrix, coeffs, ev, label)


@dataclass
class ExpansionResult:
    """Coefficients of order 0..n; ``checks`` records the self-consistency residuals."""

    lam: Jet
    kappa: list
    g: list
    nu: list
    h: list
    c: list
    nu_scale: list
    lam_route2: list
    checks: dict = field(default_factory=dict)

    @property
    def order(self) -> int:
        return self.lam.order


def _nu_row(t: SpectralTriplet):
    return t.nu


def expand_eigen_dual(fam: OperatorFamily, check: bool = True, rtol: float = 1e-11):
    """``lambda_k`` and ``kappa_k`` (row vectors) for ``k = 0..n`` by the dual recursion.

    Also evaluates the non-inductive composition sums and raises
    :class:`IdentityViolation` if the two disagree beyond ``rtol``.
    """
    t = fam.base
    h, nu, rl = t.h, t.nu, t.resolvent
    lam = [t.lam]
    kappa = [nu]
    for k in range(1, fam.order + 1):
        lk = sum(kappa[k - j] @ (fam.coeffs[j - 1] @ h) for j in range(1, k + 1))
        lam.append(lk)
        row = 0 * nu
        for j in range(1, k + 1):
            row = row + (lam[j] * kappa[k - j] - kappa[k - j] @ fam.coeffs[j - 1]) @ rl
        kappa.append(row)
    if check:
        lam_nc, kappa_nc = _noninductive(fam, lam)
        scale = max(abs(float(v)) for v in lam)
        for k in range(1, fam.order + 1):
            if not _close(lam[k], lam_nc[k], rtol, rtol * scale):
                raise IdentityViolation(f"lambda_{k}: recursion {lam[k]} vs composition sum {lam_nc[k]}")
            if not _close(kappa[k], kappa_nc[k], rtol, rtol):
                raise IdentityViolation(f"kappa_{k}: recursion and composition sum disagree")
    return lam, kappa


def _noninductive(fam: OperatorFamily, lam):
    """Sums over ordered compositions of k: ``nu A_{i1} ... A_{il-1} L_{il} h``."""
    t = fam.base
    h, nu, rl = t.h, t.nu, t.resolvent
    a = [None] + [(lam[j] * nu * 0 + 0) for j in range(1, fam.order + 1)]  # placeholder
    n = fam.order
    eye = num.eye(t.size, like=t.matrix)
    a = [None] + [(lam[j] * eye - fam.coeffs[j - 1]) @ rl for j in range(1, n + 1)]
    lam_nc = [t.lam]
    kappa_nc = [nu]
    for k in range(1, n + 1):
        lk = 0
        kk = 0 * nu
        for comp in num.compositions(k):
            row = nu
            for i in comp[:-1]:
                row = row @ a[i]
            lk = lk + row @ (fam.coeffs[comp[-1] - 1] @ h)
            kk = kk + row @ a[comp[-1]]
        lam_nc.append(lk)
        kappa_nc.append(kk)
    return lam_nc, kappa_nc


def expand_eigenfunction(fam: OperatorFamily):
    """``lambda_k`` (second route) and ``g_k`` for ``k = 0..n``."""
    t = fam.base
    h, nu, s = t.h, t.nu, t.reduced
    lam = [t.lam]
    g = [h]
    for k in range(1, fam.order + 1):
        lam.append(sum(nu @ (fam.coeffs[j - 1] @ g[k - j]) for j in range(1, k + 1)))
        acc = 0 * h
        for j in range(1, k + 1):
            acc = acc + s @ (lam[j] * g[k - j] - fam.coeffs[j - 1] @ g[k - j])
        g.append(acc)
    return lam, g


def _scalar_jet(vals) -> Jet:
    return Jet(list(vals))


def _combinatorial_reciprocal(b: Sequence, k: int):
    """k-th coefficient of ``1 / (1 + b_1 eps + ...)`` as ``sum_l (-1)^l sum prod b_j``."""
    total = 0
    for comp in num.compositions(k):
        term = (-1) ** len(comp)
        for j in comp:
            term = term * b[j]
        total = total + term
    return total


def expand_nu_h(fam: OperatorFamily, kappa: list, g: list, check: bool = True, rtol: float = 1e-11):
    """``nu_k``, ``h_k``, the coefficients ``c_k`` of ``1/nu(h(eps))`` and of ``nu(eps, h)``.

    ``nu(eps) = kappa(eps) * nu(eps, h)`` with ``nu(eps, h) = 1 / kappa(eps, 1)``;
    ``h(eps) = g(eps) / c(eps)`` with ``c(eps) = nu(eps, g(eps))``.
    """
    n = fam.order
    one = 0 * g[0] + 1
    k1 = [kv @ one for kv in kappa]
    a = list(jet_reciprocal(_scalar_jet(k1)).coeffs)
    nu = [sum(a[i] * kappa[k - i] for i in range(k + 1)) for k in range(n + 1)]
    c = [sum(nu[i] @ g[k - i] for i in range(k + 1)) for k in range(n + 1)]
    d = list(jet_reciprocal(_scalar_jet(c)).coeffs)
    h = [sum(d[i] * g[k - i] for i in range(k + 1)) for k in range(n + 1)]
    if check:
        for k in range(1, n + 1):
            ak = _combinatorial_reciprocal(k1, k)
            if not _close(a[k], ak, rtol, rtol):
                raise IdentityViolation(f"nu(eps,h) coefficient {k}: {a[k]} vs {ak}")
            dk = _combinatorial_reciprocal(c, k)
            if not _close(d[k], dk, rtol, rtol):
                raise IdentityViolation(f"1/c coefficient {k}: {d[k]} vs {dk}")
    return nu, h, c, a


def expand(fam: OperatorFamily, check: bool = True, rtol: float = 1e-11) -> ExpansionResult:
    """Run every recursion and record the normalization residuals."""
    lam, kappa = expand_eigen_dual(fam, check=check, rtol=rtol)
    lam2, g = expand_eigenfunction(fam)
    nu, h, c, a = expand_nu_h(fam, kappa, g, check=check, rtol=rtol)
    t = fam.base
    one = 0 * t.h + 1
    n = fam.order
    scale = max(1.0, max(abs(float(v)) for v in lam))
    checks = {
        "route_agreement": max([abs(float(lam[k] - lam2[k])) / scale for k in range(n + 1)]),
        "kappa_h": max([0.0] + [abs(float(kappa[k] @ t.h)) for k in range(1, n + 1)]),
        "nu_g": max([0.0] + [abs(float(t.nu @ g[k])) for k in range(1, n + 1)]),
        "nu_one": max([0.0] + [abs(float(nu[k] @ one)) for k in range(1, n + 1)]),
        "nu_h_series": max(
            [0.0] + [abs(float(sum(nu[i] @ h[k - i] for i in range(k + 1)))) for k in range(1, n + 1)]
        ),
    }
    if check and checks["route_agreement"] > rtol:
        raise IdentityViolation(f"eigenvalue routes disagree by {checks['route_agreement']:.3g}")
    return ExpansionResult(_scalar_jet(lam), kappa, g, nu, h, c, a, lam2, checks)


def closed_forms_n012(fam: OperatorFamily) -> dict:
    """Explicit order-1 and order-2 formulas, written out without recursion."""
    if fam.order < 2:
        raise FamilyError("closed forms need a family of order >= 2")
    t = fam.base
    h, nu, rl, s = t.h, t.nu, t.resolvent, t.reduced
    eye = num.eye(t.size, like=t.matrix)
    l1, l2 = fam.coeffs[0], fam.coeffs[1]
    lam1 = nu @ (l1 @ h)
    a1 = (lam1 * eye - l1) @ rl
    lam2 = nu @ (l2 @ h) + nu @ (a1 @ (l1 @ h))
    a2 = (lam2 * eye - l2) @ rl
    b1 = s @ (lam1 * eye - l1)
    b2 = s @ (lam2 * eye - l2)
    return {
        "lambda_1": lam1,
        "lambda_2": lam2,
        "kappa_1": nu @ a1,
        "kappa_2": nu @ a1 @ a1 + nu @ a2,
        "g_1": b1 @ h,
        "g_2": b2 @ h + b1 @ (b1 @ h),
    }


@dataclass
class PerturbedData:
    """True eigendata of ``L(eps)`` with ``nu(eps, 1) = 1`` and ``nu(eps, h(eps)) = 1``."""

    eps: object
    lam: object
    nu: np.ndarray
    h: np.ndarray
    kappa: np.ndarray
    g: np.ndarray


def perturbed_data(fam: OperatorFamily, eps) -> PerturbedData:
    t = spectral_triplet(fam(eps))
    kappa = t.nu / (t.nu @ fam.base.h)
    g = t.h / (fam.base.nu @ t.h)
    return PerturbedData(eps, t.lam, t.nu, t.h, kappa, g)


@dataclass
class RemainderSet:
    """Direct and formula remainders of every order ``k = 0..n`` at one eps.

    ``*_formula`` come from the exact remainder identities; ``lam_formula_eig``
    is the eigenfunction-route expression for the eigenvalue remainder.
    ``nu_*``/``h_*`` formula values are propagated from the kappa/g formulas
    through the product and reciprocal identities.
    """

    eps: object
    lam_direct: list
    lam_formula: list
    lam_formula_eig: list
    kappa_direct: list
    kappa_formula: list
    g_direct: list
    g_formula: list
    nu_direct: list
    nu_formula: list
    h_direct: list
    h_formula: list
    data: PerturbedData

    def max_mismatch(self, floor: float = 1e-30) -> dict:
        """Largest relative formula/direct gap per quantity (``floor`` guards zeros)."""

        def rel(ds, fs):
            out = 0.0
            for d, f in zip(ds, fs):
                d, f = np.atleast_1d(d), np.atleast_1d(f)
                den = max(num.max_abs(d), floor)
                out = max(out, num.max_abs(d - f) / den)
            return out

        return {
            "lambda": rel(self.lam_direct, self.lam_formula),
            "lambda_eig": rel(self.lam_direct, self.lam_formula_eig),
            "kappa": rel(self.kappa_direct, self.kappa_formula),
            "g": rel(self.g_direct, self.g_formula),
            "nu": rel(self.nu_direct, self.nu_formula),
            "h": rel(self.h_direct, self.h_formula),
        }


def direct_remainders(series: Sequence, value, eps) -> list:
    """``(value - sum_{i<=k} series_i eps^i) / eps^k`` for every k."""
    out = []
    acc = value - series[0]
    out.append(acc)
    p = 1
    for k in range(1, len(series)):
        p = p * eps
        acc = acc - series[k] * p
        out.append(acc / p)
    return out


def product_remainders(xs, x_rem, ys, y_rem, y_val, prod=lambda a, b: a * b) -> list:
    """Remainders of ``X(eps) Y(eps)`` from those of the factors.

    ``~(XY)_k = sum_{i<=k} x_i ~y_{k-i} + ~x_k Y(eps)``.
    """
    return [
        sum((prod(xs[i], y_rem[k - i]) for i in range(1, k + 1)), prod(xs[0], y_rem[k])) + prod(x_rem[k], y_val)
        for k in range(len(xs))
    ]


def reciprocal_remainders(bs, b_rem, b_val, inv) -> list:
    """Remainders of ``1/B(eps)``: ``~a_k = -(sum_i a_i ~b_{k-i}) / B(eps)``."""
    return [-sum(inv[i] * b_rem[k - i] for i in range(k + 1)) / b_val for k in range(len(bs))]


def remainders(fam: OperatorFamily, eps, res: ExpansionResult | None = None, extended: bool = True) -> RemainderSet:
    """Evaluate every remainder at ``eps`` both directly and through the identities.

    With ``extended`` the family is lifted to mpmath first: direct differences
    lose about ``u / eps^(k+1)`` to cancellation in double precision, which
    would swamp the comparison at small eps.
    """
    if eps == 0:
        raise FamilyError("remainders are defined for eps != 0")
    if extended:
        fam = fam.lift()
        eps = mpmath.mpf(eps) if not isinstance(eps, mpmath.mpf) else eps
        if res is not None and not num.is_mp(np.asarray(res.lam[0])):
            res = None
    if res is None:
        res = expand(fam, check=False)
    n = fam.order
    t = fam.base
    h, nu, rl, s = t.h, t.nu, t.resolvent, t.reduced
    pd = perturbed_data(fam, eps)
    size = t.size
    eye = num.eye(size, like=t.matrix)
    lam = res.lam.coeffs
    tl = [fam.tilde_L(eps, j) for j in range(n + 1)]

    lam_d = direct_remainders(lam, pd.lam, eps)
    kap_d = direct_remainders(res.kappa, pd.kappa, eps)
    g_d = direct_remainders(res.g, pd.g, eps)

    q = np.outer(h, pd.kappa) - eye
    qr = q @ rl
    kap_f, lam_f = [], []
    for k in range(n + 1):
        row = pd.kappa @ tl[k] @ qr
        lk = pd.kappa @ (tl[k] @ h)
        for l in range(1, k + 1):
            row = row + kap_f[k - l] @ (fam.coeffs[l - 1] @ qr + lam[l] * rl)
            lk = lk + kap_f[k - l] @ (fam.coeffs[l - 1] @ h)
        kap_f.append(row)
        lam_f.append(lk)

    tt = np.outer(pd.g, nu) - eye
    st = s @ tt
    g_f, lam_fe = [], []
    for k in range(n + 1):
        vec = st @ (tl[k] @ pd.g)
        lk = nu @ (tl[k] @ pd.g)
        for l in range(1, k + 1):
            vec = vec + (st @ fam.coeffs[l - 1] + lam[l] * s) @ g_f[k - l]
            lk = lk + nu @ (fam.coeffs[l - 1] @ g_f[k - l])
        g_f.append(vec)
        lam_fe.append(lk)

    # nu(eps) = kappa(eps) * A(eps) with A = 1 / kappa(eps, 1)
    one = 0 * h + 1
    k1 = [kv @ one for kv in res.kappa]
    k1_val = pd.kappa @ one
    k1_rem = [kv @ one for kv in kap_f]
    a_rem = reciprocal_remainders(k1, k1_rem, k1_val, res.nu_scale)
    a_val = 1 / k1_val
    nu_f = product_remainders(res.nu_scale, a_rem, res.kappa, kap_f, pd.kappa)
    nu_d = direct_remainders(res.nu, pd.nu, eps)
    # h(eps) = g(eps) * D(eps) with D = 1 / c(eps), c(eps) = nu(eps, g(eps))
    c_rem = product_remainders(res.nu, nu_f, res.g, g_f, pd.g, prod=lambda a, b: a @ b)
    c_val = pd.nu @ pd.g
    d = list(jet_reciprocal(_scalar_jet(res.c)).coeffs)
    d_rem = reciprocal_remainders(res.c, c_rem, c_val, d)
    h_f = product_remainders(d, d_rem, res.g, g_f, pd.g)
    h_d = direct_remainders(res.h, pd.h, eps)
    del a_val
    return RemainderSet(eps, lam_d, lam_f, lam_fe, kap_d, kap_f, g_d, g_f, nu_d, nu_f, h_d, h_f, pd)


def _check_modes(rs: RemainderSet, rtol: float, floor: float):
    bad = {k: v for k, v in rs.max_mismatch(floor).items() if v > rtol}
    if bad:
        raise IdentityViolation(f"formula and direct remainders disagree at eps={float(rs.eps):g}: {bad}")


def remainder_lambda(fam: OperatorFamily, eps, mode: str = "direct", check: bool = True, rtol: float = 1e-9) -> list:
    """``~lambda_k(eps)`` for ``k = 0..n`` as floats."""
    if mode not in ("direct", "formula"):
        raise ValueError(f"unknown mode {mode!r}")
    rs = remainders(fam, eps)
    if check:
        _check_modes(rs, rtol, 1e-30)
    vals = rs.lam_direct if mode == "direct" else rs.lam_formula
    return [float(v) for v in vals]


def remainder_kappa_g(fam: OperatorFamily, eps, f=None, mode: str = "formula", check: bool = True, rtol: float = 1e-9):
    """``(~kappa_k(eps, f), ~g_k(eps))`` for ``k = 0..n``.

    ``f`` is a value vector on the family's index set (default: all ones).
    """
    if mode not in ("direct", "formula"):
        raise ValueError(f"unknown mode {mode!r}")
    rs = remainders(fam, eps)
    if check:
        _check_modes(rs, rtol, 1e-30)
    f = np.ones(fam.base.size) if f is None else np.asarray(getattr(f, "values", f))
    f = num.to_mp(f)
    ks = rs.kappa_direct if mode == "direct" else rs.kappa_formula
    gs = rs.g_direct if mode == "direct" else rs.g_formula
    return [float(k @ f) for k in ks], [num.to_float(g) for g in gs]


@dataclass
class Diagnostics:
    grid: list
    magnitudes: dict
    slopes: dict
    tail_slopes: dict
    verdicts: dict


def fit_slope(eps: Sequence[float], mags: Sequence[float]) -> float:
    """Least-squares slope of log|mag| against log eps."""
    x = np.log(np.asarray(eps, float))
    y = np.log(np.maximum(np.asarray(mags, float), 1e-300))
    return float(np.polyfit(x, y, 1)[0])


def verdict(eps: Sequence[float], mags: Sequence[float], min_slope: float = 0.5, zero: float = 1e-12) -> str:
    """``vanishing`` if the remainder decays along the grid, else ``stagnant``.

    The grid is taken in decreasing eps; the last three points must show a
    slope of at least ``min_slope`` and the final magnitude must be below
    half the first.  Remainders that are all below ``zero`` vanish trivially.
    """
    order = np.argsort(np.asarray(eps, float))[::-1]
    e = np.asarray(eps, float)[order]
    m = np.asarray(mags, float)[order]
    if np.all(m <= zero):
        return "vanishing"
    tail = fit_slope(e[-3:], m[-3:])
    return "vanishing" if tail >= min_slope and m[-1] < m[0] / 2 else "stagnant"


def check_grid(grid: Sequence) -> list:
    grid = [float(e) for e in grid]
    if len(grid) < 4:
        raise FamilyError("grid count ≥ 4 required")
    if any(e <= 0 for e in grid):
        raise FamilyError("grid points must be positive")
    return grid


def convergence_diagnostics(
    fam: OperatorFamily, grid: Sequence, f=None, min_slope: float = 0.5, orders: Sequence[int] | None = None
) -> Diagnostics:
    """Remainder magnitudes of order ``n`` (or ``orders``) over an eps grid, with slopes and verdicts."""
    grid = check_grid(grid)
    lifted = fam.lift()
    res = expand(lifted, check=False)
    n = fam.order
    orders = [n] if orders is None else list(orders)
    f = np.ones(fam.base.size) if f is None else np.asarray(getattr(f, "values", f))
    f = num.to_mp(f)
    mags: dict = {}
    for e in grid:
        rs = remainders(lifted, e, res)
        for k in orders:
            mags.setdefault(f"lambda_{k}", []).append(abs(float(rs.lam_direct[k])))
            mags.setdefault(f"kappa_{k}", []).append(abs(float(rs.kappa_direct[k] @ f)))
            mags.setdefault(f"g_{k}", []).append(num.max_abs(rs.g_direct[k]))
    slopes = {q: fit_slope(grid, m) for q, m in mags.items()}
    order = np.argsort(grid)[::-1]
    tail = {q: fit_slope(np.asarray(grid)[order][-3:], np.asarray(m)[order][-3:]) for q, m in mags.items()}
    verdicts = {q: verdict(grid, m, min_slope) for q, m in mags.items()}
    return Diagnostics(grid, mags, slopes, tail, verdicts)
