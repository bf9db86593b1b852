"""Finite topological Markov shifts and depth-m locally constant functions."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

from . import _numeric as num

log = logging.getLogger(__name__)


class ShiftError(ValueError):
    pass


class ShiftSpace:
    """One-sided topological Markov shift over symbols ``0 .. k-1``.

    Built through :func:`build_shift`, which prunes symbols without an
    outgoing or incoming transition.  ``labels`` keeps the caller's original
    state names in symbol order and ``pruned`` lists the dropped ones.
    """

    def __init__(self, transition: np.ndarray, labels: Sequence, pruned: Sequence = ()):
        t = np.asarray(transition, dtype=int)
        t.setflags(write=False)
        self.transition = t
        self.labels = tuple(labels)
        self.pruned = tuple(pruned)
        self.irreducible = _strongly_connected(t)
        self.period = _period(t)
        self._words: dict[int, WordIndex] = {}
        self._prefix: dict[tuple[int, int], np.ndarray] = {}
        self._routing: dict[int, np.ndarray] = {}

    @property
    def size(self) -> int:
        return self.transition.shape[0]

    @property
    def primitive(self) -> bool:
        return self.irreducible and self.period == 1

    def __eq__(self, other):
        return isinstance(other, ShiftSpace) and np.array_equal(self.transition, other.transition)

    def __hash__(self):
        return hash(self.transition.tobytes())

    def __repr__(self):
        return f"ShiftSpace(size={self.size}, period={self.period}, irreducible={self.irreducible})"

    def words(self, m: int) -> "WordIndex":
        if m < 1:
            raise ShiftError(f"word depth must be >= 1, got {m}")
        if m not in self._words:
            self._words[m] = _enumerate(self.transition, m)
        return self._words[m]

    def prefix_map(self, deep: int, shallow: int) -> np.ndarray:
        """For each admissible ``deep``-word, the index of its ``shallow`` prefix."""
        key = (deep, shallow)
        if key not in self._prefix:
            target = self.words(shallow).position
            self._prefix[key] = np.array([target[w[:shallow]] for w in self.words(deep).words], dtype=int)
        return self._prefix[key]

    def routing(self, m: int) -> np.ndarray:
        """0/1 matrix B with B[w, v] = 1 iff v = a·w[:m-1] for an allowed a."""
        if m not in self._routing:
            idx = self.words(m)
            b = np.zeros((len(idx), len(idx)))
            for r, w in enumerate(idx.words):
                for a in range(self.size):
                    if self.transition[a, w[0]]:
                        b[r, idx.position[(a,) + w[: m - 1]]] = 1.0
            b.setflags(write=False)
            self._routing[m] = b
        return self._routing[m]

    def primitivity_index(self) -> int:
        """``M = min{m >= 1 : A^m > 0}``."""
        if not self.primitive:
            raise ShiftError("transition matrix is not primitive; M is undefined")
        k = self.size
        a = (self.transition > 0).astype(int)
        p = a.copy()
        for m in range(1, (k - 1) ** 2 + 2):
            if np.all(p > 0):
                return m
            p = np.minimum(p @ a, 1)
        raise ShiftError("primitivity index not found")  # pragma: no cover

    def spectral_radius(self) -> float:
        return float(max(abs(np.linalg.eigvals(self.transition.astype(float)))))


@dataclass(frozen=True)
class WordIndex:
    depth: int
    words: tuple
    position: dict = field(repr=False)

    def __len__(self):
        return len(self.words)

    def index(self, word) -> int:
        return self.position[tuple(word)]


def _enumerate(t: np.ndarray, m: int) -> WordIndex:
    k = t.shape[0]
    words = [(a,) for a in range(k)]
    for _ in range(m - 1):
        words = [w + (b,) for w in words for b in range(k) if t[w[-1], b]]
    words = tuple(words)
    return WordIndex(m, words, {w: i for i, w in enumerate(words)})


def _reach(t: np.ndarray) -> np.ndarray:
    k = t.shape[0]
    r = (t > 0) | np.eye(k, dtype=bool)
    for _ in range(k):
        r = r | ((r.astype(int) @ r.astype(int)) > 0)
    return r


def _strongly_connected(t: np.ndarray) -> bool:
    return bool(np.all(_reach(t)))


def _period(t: np.ndarray) -> int:
    """gcd of cycle lengths via BFS levels, per strongly connected component."""
    k = t.shape[0]
    r = _reach(t)
    seen = set()
    g = 0
    for s in range(k):
        if s in seen:
            continue
        comp = [v for v in range(k) if r[s, v] and r[v, s]]
        seen.update(comp)
        cset = set(comp)
        level = {s: 0}
        queue = [s]
        while queue:
            u = queue.pop(0)
            for v in range(k):
                if t[u, v] and v in cset and v not in level:
                    level[v] = level[u] + 1
                    queue.append(v)
        for u in comp:
            for v in comp:
                if t[u, v]:
                    g = math.gcd(g, level[u] + 1 - level[v])
    return g if g > 0 else 1


def build_shift(states: Sequence | int, transition) -> ShiftSpace:
    """Validate and prune a transition matrix into a :class:`ShiftSpace`."""
    t = np.asarray(transition)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ShiftError(f"transition matrix must be square, got shape {t.shape}")
    labels = list(range(states)) if isinstance(states, int) else list(states)
    if len(labels) != t.shape[0]:
        raise ShiftError(f"{len(labels)} states for a {t.shape[0]}x{t.shape[0]} matrix")
    if not np.all((t == 0) | (t == 1)):
        raise ShiftError("transition matrix must be 0/1")
    t = t.astype(int)
    keep = list(range(t.shape[0]))
    while True:
        sub = t[np.ix_(keep, keep)]
        alive = [keep[i] for i in range(len(keep)) if sub[i].any() and sub[:, i].any()]
        if alive == keep:
            break
        keep = alive
        if not keep:
            break
    if not keep:
        raise ShiftError("shift is empty after pruning dead symbols")
    pruned = [labels[i] for i in range(len(labels)) if i not in keep]
    if pruned:
        log.info("pruned dead symbols %s", pruned)
    return ShiftSpace(t[np.ix_(keep, keep)], [labels[i] for i in keep], pruned)


def admissible_words(shift: ShiftSpace, m: int) -> WordIndex:
    return shift.words(m)


def d_theta(u: Sequence, v: Sequence, theta: float) -> float:
    """``theta ** (first index where u and v differ)``; 0 for equal sequences."""
    for i, (a, b) in enumerate(zip(u, v)):
        if a != b:
            return theta**i
    return 0.0


class DepthFn:
    """Function of the first ``depth`` symbols, indexed by admissible words."""

    __slots__ = ("shift", "depth", "values")

    def __init__(self, shift: ShiftSpace, depth: int, values):
        values = np.asarray(values)
        if values.dtype != object:
            values = values.astype(float)
        n = len(shift.words(depth))
        if values.shape != (n,):
            raise ShiftError(f"depth-{depth} function needs {n} values, got shape {values.shape}")
        self.shift = shift
        self.depth = depth
        self.values = values

    @classmethod
    def constant(cls, shift, depth, c=1.0):
        return cls(shift, depth, np.full(len(shift.words(depth)), float(c)))

    @classmethod
    def indicator(cls, shift, word, depth=None):
        word = tuple(word)
        depth = depth or len(word)
        vals = np.array([1.0 if w[: len(word)] == word else 0.0 for w in shift.words(depth).words])
        return cls(shift, depth, vals)

    @classmethod
    def from_table(cls, shift, depth, table: dict, default=None):
        vals = []
        for w in shift.words(depth).words:
            if w in table:
                vals.append(table[w])
            elif default is not None:
                vals.append(default)
            else:
                raise ShiftError(f"no value for admissible word {w}")
        return cls(shift, depth, np.array(vals, dtype=float))

    def __call__(self, word):
        return self.values[self.shift.words(self.depth).index(tuple(word)[: self.depth])]

    def __repr__(self):
        return f"DepthFn(depth={self.depth}, values={self.values!r})"

    def refine(self, m: int) -> "DepthFn":
        return refine(self, m)

    def _coerce(self, other):
        if isinstance(other, DepthFn):
            if other.shift != self.shift:
                raise ShiftError("functions live on different shifts")
            m = max(self.depth, other.depth)
            return refine(self, m), refine(other, m)
        return self, other

    def _binop(self, other, op):
        a, b = self._coerce(other)
        if isinstance(b, DepthFn):
            return DepthFn(a.shift, a.depth, op(a.values, b.values))
        return DepthFn(a.shift, a.depth, op(a.values, b))

    def __add__(self, other):
        return self._binop(other, lambda x, y: x + y)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binop(other, lambda x, y: x - y)

    def __rsub__(self, other):
        return self._binop(other, lambda x, y: y - x)

    def __mul__(self, other):
        return self._binop(other, lambda x, y: x * y)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binop(other, lambda x, y: x / y)

    def __neg__(self):
        return DepthFn(self.shift, self.depth, -self.values)

    def sup_norm(self) -> float:
        return num.max_abs(self.values)


def refine(f: DepthFn, m: int) -> DepthFn:
    """Embed a depth-d function into depth-m space (``m >= d``)."""
    if m < f.depth:
        raise ShiftError(f"cannot refine depth-{f.depth} function to depth {m}")
    if m == f.depth:
        return f
    return DepthFn(f.shift, m, f.values[f.shift.prefix_map(m, f.depth)])


def _check_theta(theta):
    if not 0 < theta < 1:
        raise ShiftError(f"theta must lie in (0,1), got {theta}")


def lipschitz_seminorm(f: DepthFn, theta: float, n: int = 1) -> float:
    """``[f]^n_theta`` for a locally constant function.

    Maximises ``|f(w) - f(w')| / theta**j`` over admissible words agreeing on
    their first ``j >= n`` symbols and differing at position ``j``.
    """
    _check_theta(theta)
    return lipschitz_seminorm_values(f.shift, f.depth, num.to_float(f.values), theta, n)


def lipschitz_seminorm_values(shift: ShiftSpace, depth: int, values: np.ndarray, theta: float, n: int = 1) -> float:
    words = shift.words(depth).words
    best = 0.0
    for j in range(max(n, 1), depth):
        groups: dict = {}
        for w, v in zip(words, values):
            groups.setdefault(w[:j], {}).setdefault(w[j], []).append(v)
        for sub in groups.values():
            if len(sub) < 2:
                continue
            hi = {s: max(vs) for s, vs in sub.items()}
            lo = {s: min(vs) for s, vs in sub.items()}
            for s in sub:
                for t in sub:
                    if s != t:
                        best = max(best, (hi[s] - lo[t]) / theta**j)
    return float(best)


def difference_operator(shift: ShiftSpace, depth: int, theta: float, n: int = 1) -> np.ndarray:
    """Rows ``(e_w - e_w') / theta**j`` over all pairs entering the seminorm.

    ``max |D @ f| == [f]^n_theta``; used for operator-norm bounds.
    """
    words = shift.words(depth).words
    rows = []
    for j in range(max(n, 1), depth):
        for a, w in enumerate(words):
            for b, v in enumerate(words):
                if b > a and w[:j] == v[:j] and w[j] != v[j]:
                    r = np.zeros(len(words))
                    r[a], r[b] = 1.0, -1.0
                    rows.append(r / theta**j)
    if not rows:
        return np.zeros((0, len(words)))
    return np.array(rows)


def theta_norm(f: DepthFn, theta: float) -> float:
    """Composite norm ``||f||_C + [f]^1_theta``."""
    return f.sup_norm() + lipschitz_seminorm(f, theta)


def word_counts_oracle(shift: ShiftSpace, m: int) -> int:
    """Number of admissible m-words from the sum of entries of ``A^(m-1)``."""
    a = shift.transition.astype(object)
    p = reduce(lambda x, _: x.dot(a), range(m - 1), np.eye(shift.size, dtype=int).astype(object))
    return int(p.sum())
