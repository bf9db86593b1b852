"""Perturbed potentials: Ruelle families, pressure and Gibbs-measure expansions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np

from . import _numeric as num
from .perturb import (
    ExpansionResult,
    FamilyError,
    IdentityViolation,
    OperatorFamily,
    check_grid,
    direct_remainders,
    expand,
    fit_slope,
    product_remainders,
    remainders,
    verdict,
)
from .series import Jet, jet_exp, jet_log
from .shift import DepthFn, ShiftSpace, difference_operator, lipschitz_seminorm_values, refine
from .transfer import TransferOp, build_ruelle, ruelle_matrix, spectral_triplet


@dataclass
class PotentialFamily:
    """``phi(eps) = phi + phi_1 eps + ... + phi_n eps^n + ~phi_n(eps) eps^n``.

    By default the family is the polynomial itself.  ``remainder`` supplies
    ``~phi_n(eps)`` as a value vector; ``exact`` instead supplies the whole
    ``phi(eps)`` (useful for analytic families).  Either callable must accept
    ``mpmath.mpf`` when remainders are evaluated in extended precision.
    ``theta`` is an optional schedule ``eps -> theta(eps)`` in (0, 1).
    """

    shift: ShiftSpace
    phi: DepthFn
    coeffs: tuple
    remainder: Callable | None = None
    exact: Callable | None = None
    theta: Callable | None = None
    label: str = ""

    def __post_init__(self):
        self.coeffs = tuple(self.coeffs)
        for j, c in enumerate(self.coeffs, 1):
            if c.depth != self.phi.depth:
                raise FamilyError(f"phi_{j} has depth {c.depth}, base potential has depth {self.phi.depth}")
            if c.shift != self.shift:
                raise FamilyError(f"phi_{j} lives on a different shift")
        if self.phi.shift != self.shift:
            raise FamilyError("base potential lives on a different shift")
        if self.remainder is not None and self.exact is not None:
            raise FamilyError("give either a remainder or an exact potential, not both")

    @property
    def depth(self) -> int:
        return self.phi.depth

    @property
    def order(self) -> int:
        return len(self.coeffs)

    def values(self, eps, depth: int | None = None) -> np.ndarray:
        """Values of ``phi(eps)`` on admissible words of ``depth`` (default: own depth)."""
        m = depth or self.depth
        mp = isinstance(eps, mpmath.mpf)
        conv = num.to_mp if mp else (lambda a: np.asarray(a, float))
        if self.exact is not None:
            v = conv(np.asarray(self.exact(eps)))
        else:
            v = conv(self.phi.values)
            p = 1
            for c in self.coeffs:
                p = p * eps
                v = v + conv(c.values) * p
            if self.remainder is not None:
                v = v + conv(np.asarray(self.remainder(eps))) * p
        if m > self.depth:
            v = v[self.shift.prefix_map(m, self.depth)]
        return v

    def at(self, eps) -> DepthFn:
        return DepthFn(self.shift, self.depth, self.values(eps))


def _partitions(k: int, largest: int | None = None):
    """Partitions of k as multiplicity tuples ``(l_1, .., l_k)`` with ``sum j l_j = k``."""
    largest = k if largest is None else largest
    if k == 0:
        yield {}
        return
    for part in range(min(k, largest), 0, -1):
        for rest in _partitions(k - part, part):
            out = dict(rest)
            out[part] = out.get(part, 0) + 1
            yield out


def bell_sum(phis: Sequence, k: int):
    """``F_k = sum over l_1 + 2 l_2 + ... + k l_k = k of prod phi_j^{l_j} / l_j!``."""
    zero = phis[0] * 0 if phis else 0
    total = zero
    for mult in _partitions(k):
        term = zero + 1
        for j, l in mult.items():
            term = term * phis[j - 1] ** l / math.factorial(l)
        total = total + term
    return total


def bell_coefficients(phis: Sequence, check: bool = True, rtol: float = 1e-12) -> list:
    """``F_1..F_n``: coefficients of ``exp(sum_j phi_j eps^j)`` per cylinder.

    Returns value vectors.  The partition sum is cross-checked against the
    exponential-jet recursion.
    """
    vals = [np.asarray(getattr(p, "values", p)) for p in phis]
    depths = {getattr(p, "depth", None) for p in phis}
    if len(depths) > 1:
        raise FamilyError(f"potential coefficients have different depths {sorted(depths)}")
    n = len(vals)
    if n == 0:
        return []
    out = [bell_sum(vals, k) for k in range(1, n + 1)]
    if check:
        zero = vals[0] * 0
        jet = jet_exp(Jet([zero] + vals)).coeffs[1:]
        for k, (a, b) in enumerate(zip(out, jet), 1):
            a, b = num.to_float(np.asarray(a)), num.to_float(np.asarray(b))
            if not np.all(np.abs(a - b) <= rtol * np.maximum(1.0, np.abs(a))):
                raise IdentityViolation(f"F_{k}: partition sum and exponential jet disagree")
    return out


def build_family(pf: PotentialFamily, min_depth: int = 1, mp: bool = False, check: bool = True) -> OperatorFamily:
    """Ruelle-operator family ``L_k = L o (multiplication by F_k)``.

    ``evaluator(eps)`` is the Ruelle operator of ``phi(eps)`` itself.
    """
    shift = pf.shift
    m = max(pf.depth, min_depth)
    conv = num.to_mp if mp else (lambda a: np.asarray(a, float))
    phi_vals = conv(refine(pf.phi, m).values)
    coeff_vals = [conv(refine(c, m).values) for c in pf.coeffs]
    weights = num.exp(phi_vals)
    base_m = ruelle_matrix(shift, m, phi_vals)
    base = spectral_triplet(TransferOp(shift, m, base_m, weights))
    fs = bell_coefficients(coeff_vals, check=check)
    coeffs = tuple(base_m * f[None, :] for f in fs)

    def evaluator(eps):
        if mp and not isinstance(eps, mpmath.mpf):
            eps = mpmath.mpf(eps)
        return ruelle_matrix(shift, m, pf.values(eps, m))

    fam = OperatorFamily(
        base,
        coeffs,
        evaluator,
        lifter=None if mp else (lambda: build_family(pf, min_depth, mp=True, check=check)),
        label=pf.label,
    )
    if check:
        # n = 0 closed form of the remainder operator: L((e^{~phi_0} - 1) f)
        eps = mpmath.mpf("0.01") if mp else 0.01
        d0 = pf.values(eps, m) - phi_vals
        closed = base_m * (num.exp(d0) - 1)[None, :]
        direct = fam.tilde_L(eps, 0)
        if num.max_abs(closed - direct) > 1e-10 * max(1.0, num.max_abs(direct)):
            raise IdentityViolation("~L_0 differs from L((exp(~phi_0) - 1) .)")
    return fam


@dataclass
class ThermoExpansion:
    p: list
    mu: list
    expansion: ExpansionResult
    checks: dict = field(default_factory=dict)


def pressure_coefficients(lam_jet: Jet, check: bool = True, rtol: float = 1e-12) -> list:
    """``p_k``: coefficients of ``log lambda(eps)``, with the composition-sum cross-check."""
    p = list(jet_log(lam_jet).coeffs)
    if check:
        lam = lam_jet.coeffs
        for k in range(1, lam_jet.order + 1):
            total = 0
            for comp in num.compositions(k):
                l = len(comp)
                term = (-1) ** (l - 1) / (l * lam[0] ** l)
                for i in comp:
                    term = term * lam[i]
                total = total + term
            if abs(float(total - p[k])) > rtol * max(1.0, abs(float(p[k]))):
                raise IdentityViolation(f"p_{k}: log-jet {p[k]} vs composition sum {total}")
    return p


def _fvec(fam: OperatorFamily, f) -> np.ndarray:
    if f is None:
        v = np.ones(fam.base.size)
    elif isinstance(f, DepthFn):
        op = fam.base.op
        if op is None:
            raise FamilyError("DepthFn observables need a family built on a shift")
        if f.depth > op.depth:
            raise FamilyError(f"observable depth {f.depth} exceeds operator depth {op.depth}; rebuild with min_depth")
        v = refine(f, op.depth).values
    else:
        v = np.asarray(f)
    return num.to_mp(v) if fam.is_mp else np.asarray(v, float)


def gibbs_coefficients(res: ExpansionResult, f: np.ndarray) -> list:
    """``mu_k(f) = sum_i nu_i(h_{k-i} f)``."""
    n = res.order
    return [sum(res.nu[i] @ (res.h[k - i] * f) for i in range(k + 1)) for k in range(n + 1)]


def thermo_expansion(fam: OperatorFamily, f=None, phi1=None, check: bool = True) -> ThermoExpansion:
    """Pressure and Gibbs coefficients; checks ``mu_k(1) = 0`` and ``p_1 = mu_0(phi_1)``."""
    res = expand(fam, check=check)
    p = pressure_coefficients(res.lam, check=check)
    fv = _fvec(fam, f)
    mu = gibbs_coefficients(res, fv)
    ones = _fvec(fam, None)
    mass = gibbs_coefficients(res, ones)
    checks = {"mu_one": max([0.0] + [abs(float(v)) for v in mass[1:]]), "mu0_one": abs(float(mass[0]) - 1)}
    if phi1 is not None and res.order >= 1:
        checks["p1_mu0_phi1"] = abs(float(p[1] - gibbs_coefficients(res, _fvec(fam, phi1))[0]))
    return ThermoExpansion(p, mu, res, checks)


def pressure_expansion(fam: OperatorFamily, eps=None, res: ExpansionResult | None = None):
    """``(p_0..p_n, [~p_0(eps)..~p_n(eps)])``; remainders in extended precision."""
    res = res or expand(fam)
    p = pressure_coefficients(res.lam)
    if eps is None:
        return p, None
    lifted = fam.lift()
    lres = expand(lifted, check=False)
    lp = pressure_coefficients(lres.lam, check=False)
    lam_eps = spectral_triplet(lifted(mpmath.mpf(eps))).lam
    if not lam_eps > 0:
        raise FamilyError(f"lambda(eps) = {lam_eps} is not positive")
    return p, direct_remainders(lp, mpmath.log(lam_eps), mpmath.mpf(eps))


def pressure_remainder(fam: OperatorFamily, eps) -> list:
    return [float(v) for v in pressure_expansion(fam, eps)[1]]


def gibbs_remainders(fam: OperatorFamily, eps, f=None):
    """``(direct, formula)`` lists of ``~mu_k(eps, f)`` for ``k = 0..n``.

    Direct: ``(mu(eps, f) - sum mu_k(f) eps^k) / eps^k`` with
    ``mu(eps, f) = nu(eps, h(eps) f)``.  Formula:
    ``sum_i nu_i(~h_{k-i} f) + ~nu_k(h(eps) f)`` assembled from the remainder
    identities for ``~nu`` and ``~h``.
    """
    lifted = fam.lift()
    res = expand(lifted, check=False)
    fv = _fvec(lifted, f)
    rs = remainders(lifted, eps, res)
    mu = gibbs_coefficients(res, fv)
    d = rs.data
    direct = direct_remainders(mu, d.nu @ (d.h * fv), rs.eps)
    formula = product_remainders(res.nu, rs.nu_formula, res.h, rs.h_formula, d.h, prod=lambda a, b: a @ (b * fv))
    return direct, formula


def gibbs_expansion(fam: OperatorFamily, f=None, eps=None):
    """``(mu_0(f)..mu_n(f), ~mu(eps, f) per order or None)``."""
    te = thermo_expansion(fam, f)
    if eps is None:
        return te.mu, None
    direct, _ = gibbs_remainders(fam, eps, f)
    return te.mu, [float(v) for v in direct]


# operator norms on depth-m space with ||f||_F = ||f||_C + [f]_theta


@dataclass
class NormBracket:
    lower: float
    upper: float


def _sup_norm_matrix(a) -> float:
    a = num.to_float(np.asarray(a))
    return float(np.max(np.sum(np.abs(a), axis=1))) if a.size else 0.0


def f_norm(values, diff: np.ndarray) -> float:
    v = num.to_float(np.asarray(values))
    return float(np.max(np.abs(v)) + (np.max(np.abs(diff @ v)) if diff.shape[0] else 0.0))


def _probe_vectors(n: int, samples: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.vstack([np.eye(n), rng.uniform(-1.0, 1.0, size=(samples, n))])


def op_norm_F(a, diff: np.ndarray, samples: int = 1000, seed: int = 0) -> NormBracket:
    """Bracket of ``||A||_{F_theta}``: ``||A||_inf + ||D A||_inf`` above, random probes below."""
    af = num.to_float(np.asarray(a))
    upper = _sup_norm_matrix(af) + (_sup_norm_matrix(diff @ af) if diff.shape[0] else 0.0)
    lower = 0.0
    for v in _probe_vectors(af.shape[0], samples, seed):
        nv = f_norm(v, diff)
        if nv > 0:
            lower = max(lower, f_norm(af @ v, diff) / nv)
    return NormBracket(lower, upper)


def op_norm_F_to_C(a, diff: np.ndarray, samples: int = 1000, seed: int = 0) -> NormBracket:
    """Bracket of ``||A||_{F_theta -> C}``: ``||A||_inf`` above, random probes below."""
    af = num.to_float(np.asarray(a))
    upper = _sup_norm_matrix(af)
    lower = 0.0
    for v in _probe_vectors(af.shape[0], samples, seed):
        nv = f_norm(v, diff)
        if nv > 0:
            lower = max(lower, float(np.max(np.abs(af @ v))) / nv)
    return NormBracket(lower, upper)


def l1_nu_norm(values, nu) -> float:
    return float(np.sum(num.to_float(np.asarray(nu)) * np.abs(num.to_float(np.asarray(values)))))


@dataclass
class CriteriaReport:
    """Per-theorem hypothesis/conclusion sequences over the grid and their verdicts."""

    grid: list
    series: dict
    verdicts: dict
    hypothesis_holds: dict
    conclusion_holds: dict
    notes: list = field(default_factory=list)

    def consistent(self) -> dict:
        """A theorem is contradicted only if its hypothesis holds and its conclusion fails."""
        return {t: (not self.hypothesis_holds[t]) or self.conclusion_holds[t] for t in self.hypothesis_holds}


def theorem_criteria_check(
    pf: PotentialFamily,
    grid: Sequence,
    theta: float = 0.5,
    f=None,
    theorems: Sequence[str] = ("i", "ii", "iii"),
    min_depth: int = 1,
) -> CriteriaReport:
    """Evaluate the hypotheses and conclusions of the three convergence theorems.

    (i) ``||~L_n||_C -> 0`` implies ``~p_n, ~nu_n(f) -> 0``.
    (ii) ``||~L_n||_{F->C} -> 0`` with ``sup [phi(eps)]^2_theta < inf`` implies
    ``||~h_n||_{L1(nu)} -> 0`` and ``~mu_n(f) -> 0``.
    (iii) ``||S||^{n-k+1}_{F_theta(eps)} ||~L_k||_{F_theta(eps)} -> 0`` for all
    k implies ``||~h_n||_C -> 0`` and ``~mu_n(f) -> 0``; needs a theta schedule.
    Operator norms use the upper brackets, so a "vanishing" hypothesis is a
    genuine verification on the finite-dimensional representation.
    """
    grid = check_grid(grid)
    if "iii" in theorems and pf.theta is None:
        raise FamilyError("theorem (iii) needs a theta schedule")
    fam = build_family(pf, min_depth)
    lifted = fam.lift()
    res = expand(lifted, check=False)
    p = pressure_coefficients(res.lam, check=False)
    n = fam.order
    shift, m = fam.base.op.shift, fam.base.op.depth
    fv = _fvec(lifted, f)
    mu = gibbs_coefficients(res, fv)
    diff = difference_operator(shift, m, theta)
    s: dict = {}
    nu0 = fam.base.nu
    semis = []
    for e in grid:
        rs = remainders(lifted, e, res)
        d = rs.data
        tl = [num.to_float(lifted.tilde_L(rs.eps, k)) for k in range(n + 1)]
        s.setdefault("i:tL_n_C", []).append(_sup_norm_matrix(tl[n]))
        s.setdefault("i:p_n", []).append(abs(float(direct_remainders(p, mpmath.log(d.lam), rs.eps)[n])))
        s.setdefault("i:nu_n", []).append(abs(float(rs.nu_direct[n] @ fv)))
        s.setdefault("ii:tL_n_FC", []).append(op_norm_F_to_C(tl[n], diff, samples=0).upper)
        s.setdefault("ii:h_n_L1", []).append(l1_nu_norm(rs.h_direct[n], nu0))
        mu_rem = direct_remainders(mu, d.nu @ (d.h * fv), rs.eps)[n]
        s.setdefault("ii:mu_n", []).append(abs(float(mu_rem)))
        semis.append(lipschitz_seminorm_values(shift, m, num.to_float(pf.values(e, m)), theta, 2))
        if "iii" in theorems:
            th = float(pf.theta(e))
            dth = difference_operator(shift, m, th)
            s_norm = op_norm_F(num.to_float(fam.base.reduced), dth, samples=0).upper
            prod = max(s_norm ** (n - k + 1) * op_norm_F(tl[k], dth, samples=0).upper for k in range(n + 1))
            s.setdefault("iii:S_tL_product", []).append(prod)
            s.setdefault("iii:h_n_C", []).append(num.max_abs(rs.h_direct[n]))
            s.setdefault("iii:mu_n", []).append(abs(float(mu_rem)))
    verdicts = {q: verdict(grid, v) for q, v in s.items()}
    semi_ok = bool(np.isfinite(max(semis)))
    hyp = {}
    con = {}
    if "i" in theorems:
        hyp["i"] = verdicts["i:tL_n_C"] == "vanishing"
        con["i"] = verdicts["i:p_n"] == "vanishing" and verdicts["i:nu_n"] == "vanishing"
    if "ii" in theorems:
        hyp["ii"] = verdicts["ii:tL_n_FC"] == "vanishing" and semi_ok
        con["ii"] = verdicts["ii:h_n_L1"] == "vanishing" and verdicts["ii:mu_n"] == "vanishing"
    if "iii" in theorems:
        hyp["iii"] = verdicts["iii:S_tL_product"] == "vanishing"
        con["iii"] = verdicts["iii:h_n_C"] == "vanishing" and verdicts["iii:mu_n"] == "vanishing"
    s["ii:phi_seminorm2"] = semis
    return CriteriaReport(grid, s, verdicts, hyp, con)


def slope_table(grid: Sequence[float], series: dict) -> dict:
    return {q: fit_slope(grid, v) for q, v in series.items()}
