"""Perturbed one-dimensional graph-directed Markov systems on finite graphs.

Each edge carries a map family ``T_e(eps, x)`` whose coefficients are
polynomials in eps (affine ``r x + c`` or Moebius ``(a x + b)/(c x + d)``).
The physical potential ``log |T'_{w_0}(eps, pi(sigma w))|`` is evaluated on
depth-m cylinders with the coding map truncated at the cylinder and anchored
at the midpoint of the terminal seed interval.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np
from scipy.optimize import brentq

from . import _numeric as num
from .perturb import FamilyError, expand
from .series import Jet, jet_compose_scalar, jet_log, taylor_coefficients
from .shift import DepthFn, ShiftSpace, build_shift
from .thermo import PotentialFamily, build_family, gibbs_coefficients, pressure_coefficients, thermo_expansion
from .transfer import ruelle_matrix, spectral_triplet

log = logging.getLogger(__name__)


class GdmsError(ValueError):
    pass


def parse_number(v):
    """Float, int, ``Fraction`` or a string such as ``"1/3"`` -> exact ``Fraction``."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        return Fraction(v.strip())
    if isinstance(v, int):
        return Fraction(v)
    return Fraction(float(v))


def _conv(v, mp: bool):
    if mp:
        return mpmath.mpf(v.numerator) / v.denominator
    return float(v)


@dataclass(frozen=True)
class EdgeMap:
    """Map family of one edge; each coefficient is a tuple of eps-polynomial coefficients.

    ``kind == "affine"`` uses ``coeffs = (r, c)``; ``kind == "mobius"`` uses
    ``coeffs = (a, b, c, d)``.
    """

    kind: str
    coeffs: tuple

    def __post_init__(self):
        want = {"affine": 2, "mobius": 4}.get(self.kind)
        if want is None:
            raise GdmsError(f"unknown map kind {self.kind!r}")
        if len(self.coeffs) != want:
            raise GdmsError(f"{self.kind} map needs {want} coefficient series")
        object.__setattr__(self, "coeffs", tuple(tuple(parse_number(x) for x in c) for c in self.coeffs))

    @classmethod
    def affine(cls, r, c=(0,)):
        return cls("affine", (tuple(_seq(r)), tuple(_seq(c))))

    @classmethod
    def mobius(cls, a, b, c, d):
        return cls("mobius", tuple(tuple(_seq(x)) for x in (a, b, c, d)))

    def coeff_jet(self, i: int, order: int, mp: bool = False) -> Jet:
        src = self.coeffs[i]
        vals = [_conv(src[k], mp) if k < len(src) else _conv(Fraction(0), mp) for k in range(order + 1)]
        return Jet(vals)

    def coeff_at(self, i: int, eps):
        mp = isinstance(eps, mpmath.mpf)
        acc = 0
        for c in reversed(self.coeffs[i]):
            acc = acc * eps + _conv(c, mp)
        return acc

    def apply(self, eps, x):
        if self.kind == "affine":
            return self.coeff_at(0, eps) * x + self.coeff_at(1, eps)
        a, b, c, d = (self.coeff_at(i, eps) for i in range(4))
        return (a * x + b) / (c * x + d)

    def derivative(self, eps, x):
        if self.kind == "affine":
            return self.coeff_at(0, eps) + 0 * x
        a, b, c, d = (self.coeff_at(i, eps) for i in range(4))
        return (a * d - b * c) / (c * x + d) ** 2

    def apply_jet(self, order: int, x: Jet, mp: bool = False) -> Jet:
        if self.kind == "affine":
            return self.coeff_jet(0, order, mp) * x + self.coeff_jet(1, order, mp)
        a, b, c, d = (self.coeff_jet(i, order, mp) for i in range(4))
        return (a * x + b) / (c * x + d)

    def derivative_jet(self, order: int, x: Jet, mp: bool = False) -> Jet:
        if self.kind == "affine":
            return self.coeff_jet(0, order, mp)
        a, b, c, d = (self.coeff_jet(i, order, mp) for i in range(4))
        u = c * x + d
        inv_sq = jet_compose_scalar(taylor_coefficients("inverse_square", u[0], order), u)
        return (a * d - b * c) * inv_sq


def _seq(v):
    if isinstance(v, (list, tuple)):
        return v
    return (v,)


@dataclass
class GdmsSystem:
    """Finite graph, seed intervals and per-edge map families (dimension 1).

    ``edges`` is a list of ``(initial_vertex, terminal_vertex)``; map ``e``
    sends ``J[terminal]`` into ``J[initial]``.
    """

    vertices: tuple
    edges: tuple
    maps: tuple
    intervals: dict
    edge_labels: tuple = ()
    order: int = 1
    shift: ShiftSpace = field(init=False)
    contraction: float = field(init=False)

    def __post_init__(self):
        self.vertices = tuple(self.vertices)
        self.edges = tuple(tuple(e) for e in self.edges)
        self.maps = tuple(self.maps)
        if not self.edge_labels:
            self.edge_labels = tuple(str(i) for i in range(len(self.edges)))
        if len(self.maps) != len(self.edges):
            raise GdmsError(f"{len(self.edges)} edges but {len(self.maps)} maps")
        for i, t in self.edges:
            if i not in self.vertices or t not in self.vertices:
                raise GdmsError(f"edge ({i}, {t}) uses an unknown vertex")
        for v in self.vertices:
            if v not in self.intervals:
                raise GdmsError(f"vertex {v!r} has no seed interval")
            lo, hi = self.intervals[v]
            if not lo < hi:
                raise GdmsError(f"seed interval of {v!r} is empty")
        k = len(self.edges)
        a = np.array([[1 if self.edges[e][1] == self.edges[f][0] else 0 for f in range(k)] for e in range(k)])
        self.shift = build_shift(list(self.edge_labels), a)
        if self.shift.pruned:
            raise GdmsError(f"edges {list(self.shift.pruned)} lie on no bi-infinite path")
        self.contraction = self._contraction()
        self._check_open_set()

    def _interval(self, v):
        lo, hi = self.intervals[v]
        return float(lo), float(hi)

    def _contraction(self) -> float:
        r = 0.0
        for (i, t), mp_ in zip(self.edges, self.maps):
            lo, hi = self._interval(t)
            if mp_.kind == "mobius":
                c, d = (float(mp_.coeff_at(j, 0.0)) for j in (2, 3))
                if c != 0 and lo <= -d / c <= hi:
                    raise GdmsError("Moebius map has a pole on its seed interval")
            xs = np.linspace(lo, hi, 65)
            der = np.abs([float(mp_.derivative(0.0, x)) for x in xs])
            if np.min(der) <= 0:
                raise GdmsError("map derivative vanishes on its seed interval")
            r = max(r, float(np.max(der)))
        if not r < 1:
            raise GdmsError(f"system is not contractive (sup |T'| = {r:.6g})")
        return r

    def _check_open_set(self, slack: float = 1e-12):
        images = []
        for (i, t), mp_ in zip(self.edges, self.maps):
            lo, hi = self._interval(t)
            a, b = sorted((float(mp_.apply(0.0, lo)), float(mp_.apply(0.0, hi))))
            plo, phi = self._interval(i)
            if a < plo - slack or b > phi + slack:
                raise GdmsError(f"image of J_{t} under its map leaves J_{i}")
            images.append((i, a, b))
        for x in range(len(images)):
            for y in range(x + 1, len(images)):
                if images[x][0] == images[y][0]:
                    lo = max(images[x][1], images[y][1])
                    hi = min(images[x][2], images[y][2])
                    if hi - lo > slack:
                        raise GdmsError("open set condition fails: overlapping images")

    def anchor(self, edge: int, mp: bool = False):
        lo, hi = self.intervals[self.edges[edge][1]]
        lo, hi = parse_number(lo), parse_number(hi)
        return _conv((lo + hi) / 2, mp)

    def diameter(self) -> float:
        return max(self._interval(v)[1] - self._interval(v)[0] for v in self.vertices)

    def _check_word(self, w):
        w = tuple(w)
        if not w:
            raise GdmsError("empty word")
        for a, b in zip(w, w[1:]):
            if not self.shift.transition[a, b]:
                raise GdmsError(f"word {w} is not admissible")
        return w


def coding_jet(sys: GdmsSystem, w: Sequence[int], x0=None, order: int | None = None, mp: bool = False) -> Jet:
    """Jet of ``T_{w_0}(eps) o ... o T_{w_{m-1}}(eps)(x0)``; default anchor is the midpoint of ``J_{t(w_last)}``."""
    w = sys._check_word(w)
    order = sys.order if order is None else order
    if x0 is None:
        x0 = sys.anchor(w[-1], mp)
    else:
        lo, hi = sys._interval(sys.edges[w[-1]][1])
        if not lo <= float(x0) <= hi:
            raise GdmsError(f"anchor {x0} lies outside J_{sys.edges[w[-1]][1]}")
        x0 = mpmath.mpf(x0) if mp else float(x0)
    y = Jet.constant(x0, order)
    for e in reversed(w):
        y = sys.maps[e].apply_jet(order, y, mp)
    return y


def coding_error_bound(sys: GdmsSystem, m: int) -> float:
    """Depth-m truncation bound ``diam(J) r^m`` for the coding map."""
    return sys.diameter() * sys.contraction**m


def coding_value(sys: GdmsSystem, w: Sequence[int], eps, x0=None):
    w = sys._check_word(w)
    mp = isinstance(eps, mpmath.mpf)
    x = sys.anchor(w[-1], mp) if x0 is None else x0
    for e in reversed(w):
        x = sys.maps[e].apply(eps, x)
    return x


def _signed_log_jet(j: Jet) -> Jet:
    c0 = j[0]
    if float(c0) == 0:
        raise GdmsError("map derivative vanishes on the cylinder")
    return jet_log(j if float(c0) > 0 else -j)


def potential_jet(sys: GdmsSystem, w: Sequence[int], order: int | None = None, mp: bool = False) -> Jet:
    """Jet of ``log |T'_{w_0}(eps, pi(eps, sigma w))|``."""
    w = sys._check_word(w)
    order = sys.order if order is None else order
    if len(w) > 1:
        x = coding_jet(sys, w[1:], order=order, mp=mp)
    else:
        x = Jet.constant(sys.anchor(w[0], mp), order)
    return _signed_log_jet(sys.maps[w[0]].derivative_jet(order, x, mp))


def potential_value(sys: GdmsSystem, w: Sequence[int], eps):
    w = sys._check_word(w)
    mp = isinstance(eps, mpmath.mpf)
    x = coding_value(sys, w[1:], eps) if len(w) > 1 else sys.anchor(w[0], mp)
    d = sys.maps[w[0]].derivative(eps, x)
    return mpmath.log(abs(d)) if mp else math.log(abs(d))


def potential_family(sys: GdmsSystem, m: int = 1, order: int | None = None, mp: bool = False) -> PotentialFamily:
    """Depth-m :class:`PotentialFamily` of the physical potential, with the exact evaluator."""
    order = sys.order if order is None else order
    words = sys.shift.words(m).words
    jets = [potential_jet(sys, w, order, mp) for w in words]
    dtype = object if mp else float
    vals = [np.array([j[k] for j in jets], dtype=dtype) for k in range(order + 1)]
    phi = DepthFn(sys.shift, m, vals[0])
    coeffs = [DepthFn(sys.shift, m, v) for v in vals[1:]]

    def exact(eps):
        return np.array([potential_value(sys, w, eps) for w in words], dtype=object if isinstance(eps, mpmath.mpf) else float)

    return PotentialFamily(sys.shift, phi, coeffs, exact=exact, label="gdms")


def _pressure_at(sys: GdmsSystem, phi_vals, m: int, s):
    return num.log(spectral_triplet(ruelle_matrix(sys.shift, m, s * phi_vals)).lam)


def _root(sys: GdmsSystem, phi_vals: np.ndarray, m: int, tol: float = 1e-12, polish: bool = True):
    rho = sys.shift.spectral_radius()
    if rho <= 1 + 1e-12:
        raise GdmsError("degenerate: single-edge system has dimension 0")
    pf = num.to_float(phi_vals)
    if np.max(pf) >= 0:
        raise GdmsError("potential must be negative (non-contractive system)")
    f = lambda s: float(_pressure_at(sys, pf, m, s))  # noqa: E731
    hi = math.log(rho) / (-float(np.max(pf))) * 1.01 + 1e-9
    lo = 0.0
    if not (f(lo) > 0 > f(hi)):
        raise GdmsError("pressure has no sign change on [0, s_max]")
    s = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(f(s)) > tol:
        raise GdmsError(f"root-finding stalled with |P| = {abs(f(s)):.3g}")
    if polish and num.is_mp(phi_vals):
        s = mpmath.mpf(s)
        for _ in range(6):
            t = spectral_triplet(ruelle_matrix(sys.shift, m, s * phi_vals))
            p = mpmath.log(t.lam)
            dp = (t.nu * t.h) @ phi_vals
            s = s - p / dp
    return s


def bowen_dimension(sys: GdmsSystem, m: int = 1, eps=0.0, mp: bool = False, check_monotone: bool = True):
    """Root of ``s -> P(s phi(eps))`` on depth-m cylinders."""
    words = sys.shift.words(m).words
    if mp:
        eps = mpmath.mpf(eps)
    vals = np.array([potential_value(sys, w, eps) for w in words], dtype=object if mp else float)
    s = _root(sys, vals, m)
    if check_monotone:
        pf = num.to_float(vals)
        grid = np.linspace(0.0, 2 * float(s), 9)
        ps = [float(_pressure_at(sys, pf, m, x)) for x in grid]
        if np.any(np.diff(ps) >= 0):
            raise GdmsError("pressure is not strictly decreasing in s")
    return s


@dataclass
class DimensionExpansion:
    s: list
    depth: int
    p0_derivative: float
    pressure_at_s0: float
    derivative_table: dict = field(default_factory=dict)

    @property
    def order(self) -> int:
        return len(self.s) - 1

    def __call__(self, eps):
        return sum(c * eps**k for k, c in enumerate(self.s))


def _stencil_weights(j: int, q: int):
    """Central finite-difference weights for the j-th derivative on ``-q..q``."""
    pts = list(range(-q, q + 1))
    n = len(pts)
    a = mpmath.matrix(n, n)
    for r in range(n):
        for c, x in enumerate(pts):
            a[r, c] = mpmath.mpf(x) ** r
    b = mpmath.matrix(n, 1)
    b[j] = mpmath.factorial(j)
    w = mpmath.lu_solve(a, b)
    return pts, [w[i] for i in range(n)]


def _stencil_derivative(f, x0, j: int, h):
    """j-th derivative by a central stencil plus one Richardson step."""
    if j == 0:
        return f(x0)
    q = 2 if j <= 4 else (j + 2) // 2 + 1
    pts, w = _stencil_weights(j, q)
    acc = 2 * math.ceil((2 * q + 1 - j) / 2)

    def d(hh):
        return sum(wi * f(x0 + p * hh) for p, wi in zip(pts, w)) / hh**j

    coarse, fine = d(h), d(h / 2)
    return (2**acc * fine - coarse) / (2**acc - 1)


def dimension_expansion(sys: GdmsSystem, m: int = 1, n: int | None = None, h: float = 1e-3) -> DimensionExpansion:
    """Coefficients ``s_0..s_n`` of ``dim_H K(eps)``.

    ``p_k(s)`` are the pressure coefficients of the family ``s phi(eps)``;
    the equation ``sum_k p_k(s(eps)) eps^k = 0`` is solved order by order.
    Derivatives ``p_k^{(j)}(s_0)`` come from a central stencil in s,
    evaluated in extended precision.
    """
    n = sys.order if n is None else n
    pf = potential_family(sys, m, n, mp=True)
    s0 = _root(sys, pf.phi.values, m)
    cache: dict = {}

    def p_all(s):
        key = mpmath.nstr(s, 40)
        if key not in cache:
            scaled = PotentialFamily(
                pf.shift, DepthFn(pf.shift, m, s * pf.phi.values), [DepthFn(pf.shift, m, s * c.values) for c in pf.coeffs]
            )
            fam = build_family(scaled, mp=True, check=False)
            cache[key] = pressure_coefficients(expand(fam, check=False).lam, check=False)
        return cache[key]

    hh = mpmath.mpf(h)
    # taylor[k][j] = p_k^{(j)}(s0) / j!
    taylor = [[None] * (n + 1) for _ in range(n + 1)]
    for k in range(n + 1):
        for j in range(n - k + 1):
            der = _stencil_derivative(lambda s: p_all(s)[k], s0, j, hh)
            taylor[k][j] = der / mpmath.factorial(j)
    t0 = spectral_triplet(ruelle_matrix(sys.shift, m, s0 * pf.phi.values))
    p0_exact = (t0.nu * t0.h) @ pf.phi.values
    if float(p0_exact) >= 0:
        raise GdmsError("degenerate thermodynamics: d/ds P(s phi) >= 0 at s_0")
    taylor[0][1] = p0_exact
    s = [s0] + [mpmath.mpf(0)] * n
    for order in range(1, n + 1):
        delta = Jet([mpmath.mpf(0)] + s[1:])
        total = mpmath.mpf(0)
        for k in range(order + 1):
            comp = jet_compose_scalar([taylor[k][j] if j <= n - k else mpmath.mpf(0) for j in range(n + 1)], delta + s0)
            total += comp[order - k]
        s[order] = -total / p0_exact
    return DimensionExpansion(
        s,
        m,
        float(p0_exact),
        float(mpmath.log(t0.lam)),
        {"stencil_p0_prime": float(_stencil_derivative(lambda x: p_all(x)[0], s0, 1, hh))},
    )


def dimension_residuals(sys: GdmsSystem, de: DimensionExpansion, eps_values: Sequence[float]) -> list:
    """``(eps, s(eps) by root-finding, |s(eps) - sum s_k eps^k|)`` per sample."""
    out = []
    for e in eps_values:
        direct = bowen_dimension(sys, de.depth, eps=e, mp=True, check_monotone=False)
        out.append((e, float(direct), abs(float(direct - de(mpmath.mpf(e))))))
    return out


def combined_potential(sys: GdmsSystem, de: DimensionExpansion, m: int | None = None) -> PotentialFamily:
    """``psi(eps) = s(eps) phi(eps)`` with coefficients ``psi_k = sum_i s_i phi_{k-i}``.

    The exact evaluator uses the root-found ``s(eps)``.
    """
    m = de.depth if m is None else m
    n = de.order
    pf = potential_family(sys, m, n, mp=True)
    phis = [pf.phi.values] + [c.values for c in pf.coeffs]
    psi = [sum(de.s[i] * phis[k - i] for i in range(k + 1)) for k in range(n + 1)]
    cache: dict = {}

    def exact(eps):
        mp = isinstance(eps, mpmath.mpf)
        key = mpmath.nstr(mpmath.mpf(eps), 40)
        if key not in cache:
            cache[key] = bowen_dimension(sys, m, eps=eps, mp=True, check_monotone=False)
        s_eps = cache[key] if mp else float(cache[key])
        return s_eps * pf.exact(eps)

    return PotentialFamily(
        sys.shift, DepthFn(sys.shift, m, psi[0]), [DepthFn(sys.shift, m, v) for v in psi[1:]], exact=exact, label="gdms-gibbs"
    )


def gdms_gibbs_expansion(sys: GdmsSystem, m: int = 1, n: int | None = None, f=None, de: DimensionExpansion | None = None):
    """``(mu_0(f)..mu_n(f), pressure coefficients of s(eps) phi(eps))``.

    The pressure coefficients of the combined potential vanish up to the
    stencil error, which is a useful by-product check.
    """
    de = de or dimension_expansion(sys, m, n)
    cp = combined_potential(sys, de, m)
    fam = build_family(cp, mp=True, check=False)
    te = thermo_expansion(fam, f, check=False)
    return [float(v) for v in te.mu], [float(v) for v in te.p]


@dataclass
class ConditionAudit:
    t_k: list
    t_tilde: float
    p_lower: float
    p_n: float
    dimension: float | None
    passes: bool | None


def gdms_condition_audit(
    n: int,
    t_table: dict | None = None,
    t0_tilde: float = 1.0,
    s_lower: float = 0.0,
    dimension: float | None = None,
    D: int = 1,
) -> ConditionAudit:
    """Exponents ``t_k``, ``t~``, ``p(n)`` and the check ``dim / D > p(n)``.

    ``t_table[(l, k)]`` are the Hoelder exponents ``t(l, k)`` for
    ``l = 0..n``, ``k = 1..n-l+1``; omitted entries default to 1, which is
    always valid for finite edge sets.
    """
    if D != 1:
        raise GdmsError("only dimension D = 1 is supported")
    t_table = t_table or {}

    def t(l, k):
        v = float(t_table.get((l, k), 1.0))
        if not 0 < v <= 1:
            raise GdmsError(f"t({l},{k}) = {v} must lie in (0, 1]")
        return v

    t_k = []
    for k in range(n + 1):
        cands = [t(k, 1)]
        for i in range(k):
            for j in range(0, k - i + 1):
                if 1 <= i + j <= k:
                    cands.append(t(i, j + 1))
        t_k.append(min(cands))
    tt = min([t_k[n], t0_tilde] + [t0_tilde / D + (D - 1) / D * t(l, 1) for l in range(1, n + 1)])
    pl = s_lower / D
    if n == 0:
        pn = pl / tt
    else:
        cands = [pl + n * (1 - t_k[k]) / k for k in range(1, n + 1)]
        cands += [pl / t_k[k] for k in range(1, n + 1)]
        cands += [pl + 1 - tt, pl / tt]
        pn = max(cands)
    passes = None if dimension is None else bool(dimension / D > pn)
    return ConditionAudit(t_k, tt, pl, pn, dimension, passes)
