"""Constants and rate conditions for perturbations without a uniform spectral gap.

Every constant is evaluated with mpmath so that astronomically large values
stay finite; ``float`` views are offered alongside natural logarithms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np

from . import _numeric as num
from .perturb import FamilyError, check_grid, convergence_diagnostics, fit_slope, verdict
from .shift import difference_operator, lipschitz_seminorm_values, refine
from .thermo import PotentialFamily, bell_coefficients, build_family, op_norm_F, f_norm
from .transfer import SpectralTriplet, spectral_triplet


class AuditError(ValueError):
    pass


def _theta_ok(theta):
    # compared in mpf: float rounding would send theta within 1e-17 of 1 to 1
    if not 0 < mpmath.mpf(theta) < 1:
        raise AuditError(f"theta(eps) must lie in (0, 1), got {float(theta)}")


def log_c_of_eps(theta_eps, lip: float):
    """``log c(eps) = 26 lip / (1 - theta) - 4 log(1 - theta)``."""
    _theta_ok(theta_eps)
    t = mpmath.mpf(theta_eps)
    return 26 * mpmath.mpf(lip) / (1 - t) - 4 * mpmath.log(1 - t)


def c_of_eps(theta_eps, lip: float):
    """``c(eps) = exp(26 lip / (1 - theta)) / (1 - theta)^4`` as an mpf (never overflows)."""
    return mpmath.exp(log_c_of_eps(theta_eps, lip))


@dataclass
class GapSchedule:
    """Potential family with a schedule ``theta(eps) -> 1``.

    ``kind="power"`` is ``theta(eps) = 1 - eps^{1/(4(n+2))}``, the boundary
    schedule for which ``c(eps) eps^{1/(n+2)}`` is constant when the base
    potential is locally constant on 1-cylinders; ``kind="constant"`` keeps
    ``theta(eps) = theta``.  ``theta`` is the base parameter used for the
    seminorms of the unperturbed potential.
    """

    pf: PotentialFamily
    theta: float = 0.5
    kind: str = "power"
    depth: int = 2

    def __post_init__(self):
        _theta_ok(self.theta)
        if self.kind not in ("power", "constant"):
            raise AuditError(f"unknown schedule {self.kind!r}")

    @property
    def n(self) -> int:
        return self.pf.order

    def theta_of(self, eps):
        if self.kind == "constant":
            return mpmath.mpf(self.theta)
        return 1 - mpmath.mpf(eps) ** (mpmath.mpf(1) / (4 * (self.n + 2)))

    def check_monotone(self, grid: Sequence[float]) -> bool:
        """``theta(eps)`` does not decrease as eps decreases."""
        es = sorted(grid, reverse=True)
        ts = [float(self.theta_of(e)) for e in es]
        return all(b >= a for a, b in zip(ts, ts[1:]))


def _space(sched: GapSchedule):
    pf = sched.pf
    m = max(pf.depth, sched.depth)
    return pf.shift, m


def lip_base(sched: GapSchedule, theta=None) -> float:
    shift, m = _space(sched)
    vals = num.to_float(refine(sched.pf.phi, m).values)
    return lipschitz_seminorm_values(shift, m, vals, float(theta or sched.theta), 1)


def phi_remainder_norm(sched: GapSchedule, eps) -> float:
    """``||~phi_n(eps)||_{F_theta(eps)}`` of the potential remainder."""
    shift, m = _space(sched)
    pf = sched.pf
    mp_eps = mpmath.mpf(eps)
    poly = num.to_mp(refine(pf.phi, m).values)
    p = mpmath.mpf(1)
    for c in pf.coeffs:
        p = p * mp_eps
        poly = poly + num.to_mp(refine(c, m).values) * p
    rem = (pf.values(mp_eps, m) - poly) / (p if pf.order else 1)
    diff = difference_operator(shift, m, float(sched.theta_of(eps)))
    return f_norm(num.to_float(rem), diff)


@dataclass
class BConditions:
    grid: list
    c: list
    b1_margin: list
    b2_margin: list
    b1_pass: bool
    b2_pass: bool


def check_B1_B2(sched: GapSchedule, grid: Sequence, remainder_norms: Sequence | None = None, slope_tol: float = 0.05):
    """Margins ``c(eps) eps^{1/(n+2)}`` (bounded) and ``||~phi_n|| eps^{-1/(n+2)}`` (to 0).

    For ``n = 0`` the second margin is ``||~phi_0|| / c(eps)`` and (B.1)
    holds for any schedule.
    """
    grid = check_grid(grid)
    n = sched.n
    lip = lip_base(sched)
    norms = list(remainder_norms) if remainder_norms is not None else [phi_remainder_norm(sched, e) for e in grid]
    if len(norms) != len(grid):
        raise AuditError("remainder norms do not match the grid")
    cs = [c_of_eps(sched.theta_of(e), lip) for e in grid]
    ex = mpmath.mpf(1) / (n + 2)
    b1 = [float(c * mpmath.mpf(e) ** ex) for c, e in zip(cs, grid)]
    if n == 0:
        b2 = [float(mpmath.mpf(r) / c) for r, c in zip(norms, cs)]
        b1_pass = True
    else:
        b2 = [float(mpmath.mpf(r) * mpmath.mpf(e) ** (-ex)) for r, e in zip(norms, grid)]
        b1_pass = bool(np.all(np.isfinite(b1))) and fit_slope(grid, b1) >= -slope_tol
    b2_pass = verdict(grid, b2) == "vanishing"
    return BConditions(grid, [float(c) for c in cs], b1, b2, b1_pass, b2_pass)


@dataclass
class SBound:
    eps: float
    theta: float
    c: object
    c_sc: object
    c_sc2: object
    c15: object
    chain: object
    lemma: object
    empirical_lower: float
    empirical_upper: float

    @property
    def dominates(self) -> bool:
        return float(self.chain) >= self.empirical_lower and float(self.lemma) >= self.empirical_lower

    def logs(self) -> dict:
        def lg(v):
            return float(mpmath.log(v)) if v > 0 else float("-inf")

        return {"c": lg(self.c), "c_sc": lg(self.c_sc), "chain": lg(self.chain), "lemma": lg(self.lemma)}


def bound_S_norm(
    triplet: SpectralTriplet,
    theta_eps,
    phi_values,
    theta: float,
    samples: int = 1000,
    seed: int = 0,
    eps: float = float("nan"),
) -> SBound:
    """Literal upper bounds on ``||S||_{F_theta(eps)}`` and its empirical bracket.

    ``chain`` sums the proof's series ``(1/lam)(1 + ||h||) + (1/lam) c_Sc c_Sc2/(1 - c_Sc2)``;
    ``lemma`` is the stated form ``c14 c(eps)`` with
    ``c14 = (1 + ||h||_{F_theta} + 2 c15) / lam``.
    """
    _theta_ok(theta_eps)
    op = triplet.op
    if op is None:
        raise AuditError("the S bound needs a triplet built on a shift")
    shift, m = op.shift, op.depth
    big_m = shift.primitivity_index()
    n_states = shift.size
    pv = num.to_float(np.asarray(phi_values))
    lip = lipschitz_seminorm_values(shift, m, pv, theta, 1)
    sup = float(np.max(np.abs(pv)))
    t = mpmath.mpf(theta_eps)
    lipm, supm = mpmath.mpf(lip), mpmath.mpf(sup)
    c_sc = (
        1200
        / (t * (1 - t) ** 3)
        * lipm**2
        * mpmath.mpf(n_states) ** (9 * big_m)
        * mpmath.exp(18 * big_m * supm)
        * mpmath.exp(18 * lipm * t / (1 - t))
    )
    c_sc2 = (
        1 - (1 - t) / (4 * mpmath.exp(8 * lipm * t / (1 - t)) * mpmath.mpf(n_states) ** (2 * big_m) * mpmath.exp(4 * big_m * supm))
    ) ** (mpmath.mpf(1) / (2 * big_m))
    c15 = 9600 * lipm**2 * mpmath.mpf(n_states) ** (11 * big_m) * mpmath.exp(22 * big_m * supm - 26 * lipm) * big_m
    lam = mpmath.mpf(float(triplet.lam))
    h = num.to_float(triplet.h)
    h_eps = f_norm(h, difference_operator(shift, m, float(t)))
    h_base = f_norm(h, difference_operator(shift, m, theta))
    chain = (1 + h_eps) / lam + c_sc * c_sc2 / (1 - c_sc2) / lam
    c = c_of_eps(t, lip)
    lemma = (1 + h_base + 2 * c15) / lam * c
    emp = op_norm_F(num.to_float(triplet.reduced), difference_operator(shift, m, float(t)), samples, seed)
    return SBound(eps, float(t), c, c_sc, c_sc2, c15, chain, lemma, emp.lower, emp.upper)


def tilde_F(sched: GapSchedule, eps, k: int) -> np.ndarray:
    """``~F_k(eps) = (e^{phi(eps) - phi} - 1 - sum_{j<=k} F_j eps^j) / eps^k`` per word (mpf)."""
    shift, m = _space(sched)
    pf = sched.pf
    e = mpmath.mpf(eps)
    base = num.to_mp(refine(pf.phi, m).values)
    fs = bell_coefficients([num.to_mp(refine(c, m).values) for c in pf.coeffs], check=False)
    acc = num.exp(pf.values(e, m) - base) - 1
    p = mpmath.mpf(1)
    for j in range(1, k + 1):
        p = p * e
        acc = acc - fs[j - 1] * p
    return acc / p


@dataclass
class LBound:
    eps: float
    k: int
    chain: float
    literal: float
    c16: float
    empirical_lower: float
    empirical_upper: float

    @property
    def dominates(self) -> bool:
        return self.literal >= self.empirical_lower and self.chain >= self.empirical_lower


def bound_tL(sched: GapSchedule, grid: Sequence, k: int, samples: int = 1000, seed: int = 0) -> list:
    """Bounds on ``||~L_k(eps)||_{F_theta(eps)}`` over the grid.

    ``chain`` is the proof's inequality
    ``||L 1||_C (||~F_k||_C (1 + e^{lip theta^2} lip theta) + theta [~F_k]_theta + theta ||~F_k||_C)``;
    ``literal`` is ``c16 (eps + ||~phi_n|| eps^{n-k})`` (``c16 ||~phi_0||`` when
    ``n = k = 0``) with ``c16`` the largest chain/shape ratio over the grid.
    """
    grid = check_grid(grid)
    n = sched.n
    if not 0 <= k <= n:
        raise AuditError(f"order {k} outside 0..{n}")
    shift, m = _space(sched)
    fam = build_family(sched.pf, min_depth=m, mp=True, check=False)
    base = num.to_float(fam.base.matrix)
    l1 = float(np.max(base.sum(axis=1)))
    pv = num.to_float(refine(sched.pf.phi, m).values)
    rows = []
    for e in grid:
        t = float(sched.theta_of(e))
        diff = difference_operator(shift, m, t)
        lip = lipschitz_seminorm_values(shift, m, pv, t, 1)
        tf = num.to_float(tilde_F(sched, e, k))
        sup = float(np.max(np.abs(tf)))
        semi = float(np.max(np.abs(diff @ tf))) if diff.shape[0] else 0.0
        chain = l1 * (sup * (1 + np.exp(lip * t * t) * lip * t) + t * semi + t * sup)
        tl = num.to_float(fam.tilde_L(mpmath.mpf(e), k))
        emp = op_norm_F(tl, diff, samples, seed)
        r = phi_remainder_norm(sched, e)
        shape = r if n == 0 else e + r * e ** (n - k)
        rows.append((e, chain, shape, emp))
    ratios = [ch / sh for _, ch, sh, _ in rows if sh > 0]
    c16 = max(ratios) if ratios else 0.0
    return [LBound(e, k, ch, c16 * sh, c16, emp.lower, emp.upper) for e, ch, sh, emp in rows]


@dataclass
class GapReport:
    eps: float
    lam: float
    second: float
    matrix_gap: float
    theta: float
    essential_lower: float
    gap_bound: float
    note: str = "matrix gap is a finite-depth proxy; the function-space gap is at most lam(eps)(1 - theta(eps))"


def empirical_gap(fam, eps, theta_eps) -> GapReport:
    """Matrix spectrum of ``L(eps)`` plus the essential-radius bound ``theta(eps) lam(eps)``."""
    _theta_ok(theta_eps)
    m = num.to_float(np.asarray(fam(eps)))
    ev = np.sort(np.abs(np.linalg.eigvals(m)))[::-1]
    lam = float(spectral_triplet(m).lam)
    second = float(ev[1]) if len(ev) > 1 else 0.0
    t = float(theta_eps)
    return GapReport(float(eps), lam, second, lam - second, t, t * lam, lam * (1 - t))


@dataclass
class GapfreeReport:
    grid: list
    conditions: BConditions
    s_bounds: list
    l_bounds: dict
    products: dict
    product_slopes: dict
    expected_slopes: dict
    empirical_products: dict
    criterion_pass: bool
    diagnostics_vanish: bool
    dominance: bool
    gaps: list = field(default_factory=list)

    @property
    def agreement(self) -> str:
        if self.criterion_pass and self.diagnostics_vanish:
            return "criterion met; remainders vanish"
        if self.criterion_pass:
            return "criterion met but remainders do not vanish"
        if self.diagnostics_vanish:
            return "sufficient condition not met; remainders vanish anyway"
        return "criterion not met; remainders do not vanish"


def gapfree_expansion_check(sched: GapSchedule, grid: Sequence, samples: int = 200, seed: int = 0) -> GapfreeReport:
    """Product criterion ``||S||^{n-k+1} ||~L_k|| -> 0`` with the literal bounds, against diagnostics."""
    grid = check_grid(grid)
    n = sched.n
    shift, m = _space(sched)
    cond = check_B1_B2(sched, grid)
    fam = build_family(sched.pf, min_depth=m)
    base = spectral_triplet(fam.base.op)
    pv = refine(sched.pf.phi, m).values
    s_b = [bound_S_norm(base, sched.theta_of(e), pv, sched.theta, samples, seed, e) for e in grid]
    l_b = {k: bound_tL(sched, grid, k, samples, seed) for k in range(n + 1)}
    products, emp_products = {}, {}
    for k in range(n + 1):
        products[k] = [float(sb.lemma ** (n - k + 1) * lb.literal) for sb, lb in zip(s_b, l_b[k])]
        emp_products[k] = [sb.empirical_upper ** (n - k + 1) * lb.empirical_upper for sb, lb in zip(s_b, l_b[k])]
    slopes = {k: fit_slope(grid, v) for k, v in products.items()}
    expected = {k: (k + 1) / (n + 2) for k in range(n + 1)}
    # the proof's slowest rate is 1/(n+2); the 0.5 remainder threshold would reject it
    crit = all(verdict(grid, v, min_slope=0.5 / (n + 2)) == "vanishing" for v in products.values())
    crit = crit and cond.b1_pass and cond.b2_pass
    diag = convergence_diagnostics(fam, grid)
    vanish = all(v == "vanishing" for v in diag.verdicts.values())
    dom = all(sb.dominates for sb in s_b) and all(lb.dominates for v in l_b.values() for lb in v)
    gaps = [empirical_gap(fam, e, sched.theta_of(e)) for e in grid]
    return GapfreeReport(grid, cond, s_b, l_b, products, slopes, expected, emp_products, crit, vanish, dom, gaps)
