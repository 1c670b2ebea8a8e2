"""Quantum trigonometric arithmetic and admissible edge colorings.

All quantities live at a root-of-unity level r.  The basic bracket is
``<n> = sin(pi n / r)``; quantum integers are ``[n] = <n>/<1>``.  Products
of many brackets (vertex weights, recoupling nets) are evaluated in log
space with the sign tracked separately, since ``<n>!`` underflows double
precision for levels in the thousands.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable

import numpy as np

if TYPE_CHECKING:
    from .surface import Surface


class AdmissibilityError(ValueError):
    """Raised when colors violate parity, triangle, or level bounds."""


def qsin(n, r):
    """The bracket <n> = sin(pi n / r).  Accepts scalars or arrays.

    Integer-valued arguments hit the walls n = 0 mod r exactly: those
    zeros are returned as true zeros rather than sin of a rounded angle,
    so square-rooted products of brackets vanish where they must.
    """
    n = np.asarray(n, dtype=np.float64)
    rem = np.mod(n, 2 * r)
    return np.where(np.mod(rem, r) == 0, 0.0, np.sin(np.pi * rem / r))


def qint(n, r):
    """Quantum integer [n] = <n>/<1>."""
    return qsin(n, r) / math.sin(math.pi / r)


class SinTables:
    """Cached log-magnitude and sign tables for <n> and <n>!.

    Indices run over 0 .. 4r+3, wide enough for every recoupling sum that
    appears at level r.  ``<n>`` vanishes at multiples of r; the sign entry
    is 0 there and the log entry is -inf.
    """

    def __init__(self, r: int, dtype=np.float64):
        self.r = r
        self.dtype = dtype
        n = np.arange(4 * r + 4)
        vals = np.sin(pi_for(dtype) * n / r)
        self.sign = np.sign(vals)
        # exact zeros at multiples of r, not victims of rounding
        self.sign[n % r == 0] = 0.0
        with np.errstate(divide="ignore"):
            self.log = np.where(self.sign == 0.0, -np.inf, np.log(np.abs(vals)))
        # factorial tables: <0>! = 1
        self.logf = np.concatenate([np.zeros(1, dtype=self.log.dtype),
                                    np.cumsum(self.log[1:])])
        self.signf = np.concatenate([np.ones(1, dtype=self.sign.dtype),
                                     np.cumprod(self.sign[1:])])

    def fact(self, n):
        """(log |<n>!|, sign) with n < 0 treated as an empty product of zero."""
        n = np.asarray(n)
        neg = n < 0
        idx = np.where(neg, 0, n)
        lg = np.where(neg, -np.inf, self.logf[idx])
        sg = np.where(neg, 0.0, self.signf[idx])
        return lg, sg


_PI_LONG = np.longdouble("3.141592653589793238462643383279502884197")


def pi_for(dtype):
    """Pi at the working precision of the requested dtype."""
    return _PI_LONG if dtype == np.longdouble else np.pi


@lru_cache(maxsize=64)
def sin_tables(r: int, dtype=np.float64) -> SinTables:
    return SinTables(r, dtype)


def admissible_triple(a: int, b: int, c: int, r: int) -> bool:
    """Vertex condition: odd sum, strict triangle, a+b+c < 2r.

    Colors are 1-based; the strict triangle system is exactly the condition
    making every factorial argument of the vertex weight a nonnegative
    integer.
    """
    if min(a, b, c) < 1 or max(a, b, c) > r - 1:
        return False
    if (a + b + c) % 2 == 0:
        return False
    if a + b + c >= 2 * r:
        return False
    return abs(a - b) < c < a + b


def vertex_weight(a: int, b: int, c: int, r: int) -> float:
    """The trivalent vertex weight <a,b,c>.

    Defined as <(a+b+c-1)/2>! <(a+b-c-1)/2>! <(a-b+c-1)/2>! <(b+c-a-1)/2>!
    divided by <a-1>! <b-1>! <c-1>!; positive and fully symmetric on
    admissible triples.
    """
    if not admissible_triple(a, b, c, r):
        raise AdmissibilityError(f"inadmissible triple {(a, b, c)} at level {r}")
    t = sin_tables(r)
    num = [(a + b + c - 1) // 2, (a + b - c - 1) // 2,
           (a - b + c - 1) // 2, (b + c - a - 1) // 2]
    den = [a - 1, b - 1, c - 1]
    lg = 0.0
    for m in num:
        lg += t.logf[m]
    for m in den:
        lg -= t.logf[m]
    return float(np.exp(lg))


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x).limit_denominator(10**6)


@dataclass(frozen=True)
class Level:
    """A TQFT level r together with the boundary color fractions.

    Marked points carry fractions t_i in (0,1); at level r the boundary
    colors are the integers r*t_i, so r must be a multiple of the common
    denominator of the t_i.
    """

    r: int
    fractions: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.r < 3:
            raise ValueError("level r must be at least 3")
        fr = tuple(_as_fraction(t) for t in self.fractions)
        object.__setattr__(self, "fractions", fr)
        for t in fr:
            if not (0 < t < 1):
                raise ValueError(f"boundary fraction {t} outside (0,1)")
        if self.r % self.denominator:
            raise ValueError(
                f"level {self.r} not divisible by boundary denominator "
                f"{self.denominator}")

    @property
    def denominator(self) -> int:
        d = 1
        for t in self.fractions:
            d = math.lcm(d, t.denominator)
        return d

    @property
    def boundary_colors(self) -> tuple:
        return tuple(int(t * self.r) for t in self.fractions)

    @classmethod
    def for_surface(cls, r: int, surface: "Surface") -> "Level":
        return cls(r, surface.boundary_fractions)


def is_admissible(colors, surface: "Surface", level: Level) -> bool:
    """Check every vertex triple and the boundary pinning of a coloring.

    ``colors`` is indexed by the surface's edge order.
    """
    colors = np.asarray(colors, dtype=int)
    if colors.shape != (len(surface.edges),):
        raise ValueError("coloring length does not match edge count")
    for col, c_pin in zip(surface.leg_columns, level.boundary_colors):
        if colors[col] != c_pin:
            return False
    r = level.r
    for (i, j, k) in surface.vertex_triples:
        if not admissible_triple(int(colors[i]), int(colors[j]), int(colors[k]), r):
            return False
    return True


def _range_from_pair(a: int, b: int, r: int):
    """Admissible third colors c for a vertex (a, b, c): (lo, hi, parity)."""
    lo = abs(a - b) + 1
    hi = min(a + b - 1, 2 * r - 1 - a - b, r - 1)
    parity = (a + b + 1) % 2
    if lo % 2 != parity:
        lo += 1
    return lo, hi, parity


def enumerate_colorings(surface: "Surface", level: Level) -> np.ndarray:
    """All admissible colorings, lexicographic in the surface's edge order.

    Returns an (N, E) int array.  Legs are pinned to the boundary colors.
    The walk assigns edges in order and, where an edge is the last
    unassigned one at a vertex, restricts its candidates to the exact
    admissible window; the final edge is filled in bulk.
    """
    r = level.r
    edges = surface.edges
    ne = len(edges)
    pinned = {col: c for col, c in zip(surface.leg_columns, level.boundary_colors)}

    # vertices whose constraint completes when a given column is assigned
    finishing = [[] for _ in range(ne)]
    for trip in surface.vertex_triples:
        finishing[max(trip)].append(trip)

    rows: list[np.ndarray] = []
    partial = np.zeros(ne, dtype=int)

    def candidates(j: int) -> np.ndarray:
        if j in pinned:
            cand = np.array([pinned[j]], dtype=int)
        else:
            cand = np.arange(1, r, dtype=int)
        for trip in finishing[j]:
            others = [t for t in trip if t != j]
            if len(others) == 1:
                # loop vertex (c_j, c_j, c_f): parity free, window from c_f
                f = partial[others[0]]
                lo = f // 2 + 1
                hi = min((2 * r - f - 1) // 2, r - 1)
                cand = cand[(cand >= lo) & (cand <= hi)]
                if f % 2 == 0:
                    cand = cand[:0]
            else:
                a, b = partial[others[0]], partial[others[1]]
                lo, hi, parity = _range_from_pair(a, b, r)
                cand = cand[(cand >= lo) & (cand <= hi) & (cand % 2 == parity)]
        return cand

    def walk(j: int):
        if j == ne - 1:
            cand = candidates(j)
            if cand.size:
                block = np.tile(partial, (cand.size, 1))
                block[:, j] = cand
                rows.append(block)
            return
        for c in candidates(j):
            partial[j] = c
            walk(j + 1)
        partial[j] = 0

    walk(0)
    if not rows:
        return np.zeros((0, ne), dtype=int)
    return np.concatenate(rows, axis=0)


class ColoringSet:
    """An enumerated admissible coloring set with O(log n) lookup.

    Rows are in lexicographic order; ``lookup`` maps coloring rows to their
    indices, returning -1 for colorings outside the set.
    """

    def __init__(self, colorings: np.ndarray, r: int):
        self.array = colorings
        self.r = r
        base = r + 2
        self._weights = base ** np.arange(colorings.shape[1] - 1, -1, -1, dtype=np.int64)
        self.codes = colorings @ self._weights
        # lexicographic enumeration makes the codes strictly increasing
        if np.any(np.diff(self.codes) <= 0):
            order = np.argsort(self.codes)
            self.array = self.array[order]
            self.codes = self.codes[order]

    def __len__(self):
        return len(self.array)

    def lookup(self, colorings) -> np.ndarray:
        colorings = np.atleast_2d(np.asarray(colorings, dtype=np.int64))
        codes = colorings @ self._weights
        pos = np.searchsorted(self.codes, codes)
        pos = np.clip(pos, 0, len(self.codes) - 1)
        ok = self.codes[pos] == codes
        return np.where(ok, pos, -1)


@lru_cache(maxsize=32)
def _coloring_set_cached(surface_key, r: int) -> ColoringSet:
    from .surface import surface_from_key

    surface = surface_from_key(surface_key)
    level = Level.for_surface(r, surface)
    return ColoringSet(enumerate_colorings(surface, level), r)


def coloring_set(surface: "Surface", level: Level) -> ColoringSet:
    """Enumeration with a per-(surface, r) cache."""
    return _coloring_set_cached(surface.cache_key, level.r)


def norm_sq(colors, surface: "Surface", level: Level, variant: str = "global"):
    """Squared norm of the unnormalized basis vector at a coloring.

    The global variant carries the factor (2/r)^{chi/2} with chi the Euler
    count V - E of the graph and divides by <c_e> over every edge.  The
    local variant drops the global factor and divides by <c_e> for edges
    with both ends on vertices and <c_e>^{1/2} for edges with one free end
    (none occur in the built-in surfaces).  Vectorized over rows.
    """
    colors = np.atleast_2d(np.asarray(colors, dtype=int))
    r = level.r
    t = sin_tables(r)
    lg = np.zeros(len(colors))
    for (i, j, k) in surface.vertex_triples:
        a, b, c = colors[:, i], colors[:, j], colors[:, k]
        num = [(a + b + c - 1) // 2, (a + b - c - 1) // 2,
               (a - b + c - 1) // 2, (b + c - a - 1) // 2]
        for m in num:
            lg += t.logf[m]
        for m in (a - 1, b - 1, c - 1):
            lg -= t.logf[m]
    if variant == "global":
        for col in range(len(surface.edges)):
            lg -= t.log[colors[:, col]]
        chi = surface.euler_count
        out = np.exp(lg) * (2.0 / r) ** (chi / 2.0)
    elif variant == "local":
        for col in range(len(surface.edges)):
            lg -= t.log[colors[:, col]]  # all built-in edges have two vertex ends
        out = np.exp(lg)
    else:
        raise ValueError(f"unknown norm variant {variant!r}")
    return out if out.size > 1 else float(out[0])
