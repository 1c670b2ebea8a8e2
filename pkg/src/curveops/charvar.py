"""SU(2) character-variety side: explicit representations and traces.

Representations are built from pants triples glued along the decomposition
circles, with the gluing elements carrying the twist angles.  All group
elements are unit quaternions; the trace of the corresponding matrix is
twice the real part.  Curve traces evaluated here are the classical side
of the operator symbols: minus the trace of the holonomy.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .fusion import CapabilityError

__all__ = [
    "SU2Element", "qexp", "conjugator", "pants_rep", "Representation",
    "build_representation", "trace_function", "hamiltonian",
    "poisson_bracket", "AngleLattice", "origin_shift", "random_observable",
]

_UNIT_TOL = 1e-12
_IRRED_GUARD = 1e-6


@dataclass(frozen=True)
class SU2Element:
    """Unit quaternion w + x i + y j + z k; trace of the matrix is 2w."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w ** 2 + self.x ** 2 + self.y ** 2 + self.z ** 2)
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"quaternion norm {n} is not 1")
        if abs(n - 1.0) > _UNIT_TOL:
            object.__setattr__(self, "w", self.w / n)
            object.__setattr__(self, "x", self.x / n)
            object.__setattr__(self, "y", self.y / n)
            object.__setattr__(self, "z", self.z / n)

    @property
    def trace(self) -> float:
        return 2.0 * self.w

    @property
    def vec(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def axis(self) -> np.ndarray:
        """Unit rotation axis; arbitrary (x-hat) for central elements."""
        v = self.vec
        n = np.linalg.norm(v)
        if n < 1e-14:
            return np.array([1.0, 0.0, 0.0])
        return v / n

    def __mul__(self, other: "SU2Element") -> "SU2Element":
        a, b, c, d = self.w, self.x, self.y, self.z
        e, f, g, h = other.w, other.x, other.y, other.z
        return SU2Element(
            a * e - b * f - c * g - d * h,
            a * f + b * e + c * h - d * g,
            a * g - b * h + c * e + d * f,
            a * h + b * g - c * f + d * e)

    def inverse(self) -> "SU2Element":
        return SU2Element(self.w, -self.x, -self.y, -self.z)

    def __neg__(self) -> "SU2Element":
        return SU2Element(-self.w, -self.x, -self.y, -self.z)

    def distance(self, other: "SU2Element") -> float:
        return max(abs(self.w - other.w), abs(self.x - other.x),
                   abs(self.y - other.y), abs(self.z - other.z))


_ONE = SU2Element(1.0, 0.0, 0.0, 0.0)


def qexp(axis, angle: float) -> SU2Element:
    """exp(angle * unit axis) = cos(angle) + sin(angle) axis."""
    ax = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(ax)
    if n < 1e-14:
        return _ONE
    ax = ax / n
    s = math.sin(angle)
    return SU2Element(math.cos(angle), s * ax[0], s * ax[1], s * ax[2])


def _pure(axis) -> SU2Element:
    """The pure quaternion of a unit axis (rotation generator)."""
    ax = np.asarray(axis, dtype=np.float64)
    return SU2Element(0.0, ax[0], ax[1], ax[2])


def conjugator(src: SU2Element, dst: SU2Element) -> SU2Element:
    """Some q with q src q^-1 = dst, for elements of equal trace.

    Rotates the axis of src onto the axis of dst; the full solution set is
    q * exp(axis(src) * alpha), fixed elsewhere by gauge conditions.
    """
    if abs(src.trace - dst.trace) > 1e-9:
        raise ValueError("conjugator needs equal traces")
    a, b = src.axis(), dst.axis()
    c = float(np.dot(a, b))
    if c > 1.0 - 1e-14:
        return _ONE
    if c < -1.0 + 1e-14:
        # antipodal: rotate by pi about any perpendicular direction
        perp = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-7:
            perp = np.cross(a, [0.0, 1.0, 0.0])
        return qexp(perp, math.pi / 2)
    n = np.cross(a, b)
    ang = math.atan2(float(np.linalg.norm(n)), c)
    return qexp(n, ang / 2)


def pants_rep(ta: float, tb: float, tc: float):
    """Canonical flat SU(2) triple (A, B, C) with A B C = 1.

    Traces are 2cos(pi t); A points along i, B lies in the (i, j) plane
    with nonnegative j component.  (1/2, 1/2, 1/2) gives (i, j, -k).
    Raises ValueError within 1e-6 of the reducible locus.
    """
    for t in (ta, tb, tc):
        if not (_IRRED_GUARD < t < 1.0 - _IRRED_GUARD):
            raise ValueError(f"cuff parameter {t} too close to the center")
    ca, sa = math.cos(math.pi * ta), math.sin(math.pi * ta)
    cb, sb = math.cos(math.pi * tb), math.sin(math.pi * tb)
    cc = math.cos(math.pi * tc)
    k1 = (ca * cb - cc) / (sa * sb)
    if abs(k1) > 1.0 - _IRRED_GUARD:
        raise ValueError(
            f"cuff triple ({ta}, {tb}, {tc}) is within the irreducibility "
            f"guard of the reducible locus")
    k2 = math.sqrt(1.0 - k1 * k1)
    A = SU2Element(ca, sa, 0.0, 0.0)
    B = SU2Element(cb, sb * k1, sb * k2, 0.0)
    C = (A * B).inverse()
    return A, B, C


# ---------- words with twist factors ----------
# tokens: ("q", SU2Element) constant, ("tw", col, sign) twist insertion
# exp(sign * theta_col * axis_col)


class Representation:
    """A point of the character variety in gauged gluing coordinates.

    Holds the constant quaternions of a fixed generating system and word
    tables for the library curves; twist angles enter through dedicated
    tokens so traces and their exact theta derivatives come from the same
    data.
    """

    def __init__(self, surface, tau, theta, words, axes, residuals):
        self.surface = surface
        self.tau = np.asarray(tau, dtype=np.float64)
        self.theta = np.asarray(theta, dtype=np.float64)
        self.words = words
        self.axes = axes
        self.relation_residuals = residuals

    def _token_value(self, tok) -> SU2Element:
        kind = tok[0]
        if kind == "q":
            return tok[1]
        _, col, sign = tok
        return qexp(self.axes[col], sign * self.theta[col])

    def holonomy(self, name: str) -> SU2Element:
        out = _ONE
        for tok in self.words[name]:
            out = out * self._token_value(tok)
        return out

    def trace(self, word: str) -> float:
        """Trace of a product of named generators; 'x~' inverts x."""
        out = _ONE
        for name in word.split():
            if name.endswith("~"):
                out = out * self.holonomy(name[:-1]).inverse()
            else:
                out = out * self.holonomy(name)
        return out.trace

    def dtheta_trace(self, word: str, col: int) -> float:
        """Exact derivative of trace(word) in the twist angle of an edge."""
        toks = []
        for name in word.split():
            seq = self.words[name.rstrip("~")]
            if name.endswith("~"):
                toks.extend(self._invert(seq))
            else:
                toks.extend(seq)
        vals = [self._token_value(t) for t in toks]
        total = 0.0
        for j, tok in enumerate(toks):
            if tok[0] != "tw" or tok[1] != col:
                continue
            gen = _pure(self.axes[col])
            acc = _ONE
            for i, v in enumerate(vals):
                acc = acc * (gen * v if i == j else v)
            total += tok[2] * acc.trace
        return total

    @staticmethod
    def _invert(seq):
        out = []
        for tok in reversed(seq):
            if tok[0] == "q":
                out.append(("q", tok[1].inverse()))
            else:
                out.append(("tw", tok[1], -tok[2]))
        return out

    def max_residual(self) -> float:
        return max(self.relation_residuals, default=0.0)


def _extremal_phase(axis, sample, maximize: bool) -> float:
    """Phase a extremizing a -> sample(exp(axis * a) ...) trace forms.

    sample(a) must be the trace as a function of the gauge phase; the
    result extremizes the trigonometric polynomial through five probes.
    """
    probes = np.linspace(0.0, 2 * math.pi, 5, endpoint=False)
    vals = np.array([sample(a) for a in probes])
    # fit c0 + c1 cos a + s1 sin a + c2 cos 2a + s2 sin 2a exactly
    M = np.column_stack([np.ones_like(probes), np.cos(probes), np.sin(probes),
                         np.cos(2 * probes), np.sin(2 * probes)])
    coef = np.linalg.solve(M, vals)
    grid = np.linspace(0.0, 2 * math.pi, 2048, endpoint=False)
    f = (coef[0] + coef[1] * np.cos(grid) + coef[2] * np.sin(grid)
         + coef[3] * np.cos(2 * grid) + coef[4] * np.sin(2 * grid))
    a0 = grid[int(np.argmax(f) if maximize else np.argmin(f))]
    # one Newton refinement on the trig polynomial
    for _ in range(3):
        d1 = (-coef[1] * np.sin(a0) + coef[2] * np.cos(a0)
              - 2 * coef[3] * np.sin(2 * a0) + 2 * coef[4] * np.cos(2 * a0))
        d2 = (-coef[1] * np.cos(a0) - coef[2] * np.sin(a0)
              - 4 * coef[3] * np.cos(2 * a0) - 4 * coef[4] * np.sin(2 * a0))
        if abs(d2) < 1e-12:
            break
        a0 -= d1 / d2
    return float(a0)


def _rep_punctured_torus(surf, tau, theta):
    col_e = surf.edge_index["e"]
    col_l = surf.edge_index["l"]
    A, B, C = pants_rep(tau[col_e], tau[col_e], tau[col_l])
    g = conjugator(A, B.inverse())
    # gauge: minimal trace at theta = 0 puts the dual trace at the
    # positive extremum of -Tr, matching the positive loop coefficients
    alpha = _extremal_phase(A.axis(),
                            lambda a: (qexp(A.axis(), a) * g).trace,
                            maximize=False)
    g0 = qexp(A.axis(), alpha) * g
    res = [(g0 * A * g0.inverse()).distance(B.inverse())]
    words = {
        "a": [("q", A)],
        "b": [("tw", col_e, +1), ("q", g0)],
    }
    axes = {col_e: A.axis()}
    return Representation(surf, tau, theta, words, axes, res)


def _rep_four_holed_sphere(surf, tau, theta):
    col_m = surf.edge_index["m"]
    cols_l = [surf.edge_index[e] for e in ("l1", "l2", "l3", "l4")]
    t1, t2, t3, t4 = (tau[c] for c in cols_l)
    tm = tau[col_m]
    A1, B1, C1 = pants_rep(t1, t2, tm)   # cuffs l1, l2, m side 0
    A2, B2, C2 = pants_rep(tm, t3, t4)   # cuffs m, l3, l4 side 1
    m_hol = C1.inverse()                 # = x1 x2
    h = conjugator(A2, C1)
    axis_m = m_hol.axis()
    alpha = _extremal_phase(
        axis_m,
        lambda a: (A1 * (qexp(axis_m, a) * h) * B2
                   * (qexp(axis_m, a) * h).inverse()).trace,
        maximize=True)
    h0 = qexp(axis_m, alpha) * h
    res = [(h0 * A2 * h0.inverse()).distance(C1)]
    words = {
        "x1": [("q", A1)],
        "x2": [("q", B1)],
        "x3": [("tw", col_m, +1), ("q", h0), ("q", B2),
               ("q", h0.inverse()), ("tw", col_m, -1)],
        "x4": [("tw", col_m, +1), ("q", h0), ("q", C2),
               ("q", h0.inverse()), ("tw", col_m, -1)],
    }
    axes = {col_m: axis_m}
    return Representation(surf, tau, theta, words, axes, res)


def _rep_genus2(surf, tau, theta):
    col_e = surf.edge_index["e"]
    col_f = surf.edge_index["f"]
    col_g = surf.edge_index["g"]
    te, tf, tg = tau[col_e], tau[col_f], tau[col_g]
    E0, F0, G0 = pants_rep(te, tf, tg)   # cyclic order (e, f, g) at v0
    A1, B1, C1 = pants_rep(te, tg, tf)   # cyclic order (e, g, f) at v1
    # align side 1 along the tree edge e: E1 = E0^{-1}
    q = conjugator(A1, E0.inverse())
    axis_e = E0.axis()
    # gauge phase of the alignment: extremize the e-dual trace
    alpha = _extremal_phase(
        axis_e,
        lambda a: _de_trace(E0, F0, qexp(axis_e, a) * q, C1),
        maximize=True)
    q0 = qexp(axis_e, alpha) * q
    E1 = q0 * A1 * q0.inverse()
    G1 = q0 * B1 * q0.inverse()
    F1 = q0 * C1 * q0.inverse()
    axis_f = F0.axis()
    axis_g = G0.axis()
    hf = conjugator(F1, F0.inverse())
    beta = _extremal_phase(
        axis_f,
        lambda a: ((qexp(axis_f, a) * hf) * E1
                   * (qexp(axis_f, a) * hf).inverse() * E0).trace,
        maximize=True)
    hf0 = qexp(axis_f, beta) * hf
    hg = conjugator(G1, G0.inverse())
    gamma = _extremal_phase(
        axis_g,
        lambda a: ((qexp(axis_g, a) * hg) * E1
                   * (qexp(axis_g, a) * hg).inverse() * E0).trace,
        maximize=True)
    hg0 = qexp(axis_g, gamma) * hg
    res = [
        (E0 * F0 * G0).distance(_ONE),
        (E1 * G1 * F1).distance(_ONE),
        E1.distance(E0.inverse()),
        (hf0 * F1 * hf0.inverse()).distance(F0.inverse()),
        (hg0 * G1 * hg0.inverse()).distance(G0.inverse()),
    ]
    words = {
        "Ce": [("q", E0)],
        "Cf": [("q", F0)],
        "Cg": [("q", G0)],
        # dual curves: out along the edge, around the partner cuff, back
        "De": [("tw", col_e, +1), ("q", F1), ("tw", col_e, -1), ("q", F0)],
        "Df": [("tw", col_f, +1), ("q", hf0), ("q", E1),
               ("q", hf0.inverse()), ("tw", col_f, -1), ("q", E0)],
        "Dg": [("tw", col_g, +1), ("q", hg0), ("q", E1),
               ("q", hg0.inverse()), ("tw", col_g, -1), ("q", E0)],
    }
    axes = {col_e: axis_e, col_f: axis_f, col_g: axis_g}
    return Representation(surf, tau, theta, words, axes, res)


def _de_trace(E0, F0, q, C1):
    F1 = q * C1 * q.inverse()
    return (F1 * F0).trace


_BUILDERS = {
    "punctured-torus": _rep_punctured_torus,
    "four-holed-sphere": _rep_four_holed_sphere,
    "genus2": _rep_genus2,
}


def build_representation(surface, tau, theta) -> Representation:
    """Flat SU(2) data at interior cuff parameters tau and angles theta.

    tau and theta are indexed by the surface's edge order; leg entries of
    tau carry the boundary fractions and leg angles are ignored.
    """
    builder = _BUILDERS.get(surface.name)
    if builder is None:
        raise CapabilityError(
            f"no representation builder for surface {surface.name!r}")
    tau = np.asarray(tau, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    ne = len(surface.edge_ids)
    if tau.shape != (ne,) or theta.shape != (ne,):
        raise ValueError("tau/theta length does not match edge count")
    return builder(surface, tau, theta)


# ---------- trace functions of library curves ----------


def _parse_label(label: str):
    """Split a library label into atoms, stripping twist wrappers.

    Twist data is carried by the curve's annulus records, so the wrapper
    text itself is redundant here.
    """
    while label.startswith("tw["):
        label = label[label.index("(") + 1:-1]
    return [p.strip() for p in label.split(" u ") if p.strip()]


_ATOM_WORDS = {
    ("punctured-torus", "C"): {"e": "a"},
    ("punctured-torus", "D"): {"e": "b"},
    ("four-holed-sphere", "C"): {"m": "x1 x2"},
    ("four-holed-sphere", "D"): {"m": "x1 x3"},
    ("genus2", "C"): {"e": "Ce", "f": "Cf", "g": "Cg"},
    ("genus2", "D"): {"e": "De", "f": "Df", "g": "Dg"},
}


def _atom_word(surface, atom: str):
    kind = atom[0]
    body = atom[atom.index("[") + 1:atom.index("]")]
    count = 1
    if "x" in atom[atom.index("]"):]:
        count = int(atom[atom.index("]") + 2:])
    table = _ATOM_WORDS.get((surface.name, kind))
    if table is None or body not in table:
        raise CapabilityError(f"no holonomy word for {atom!r} on {surface.name}")
    return table[body], count


def trace_function(spec):
    """The classical observable of a multicurve: product over components
    of minus the holonomy trace, with twists realized as angle shears."""
    surf = spec.surface
    atoms = _parse_label(spec.label)
    shears = []
    for eid, ann in spec.annuli.items():
        if ann.pattern == 2 and ann.twist:
            shears.append((surf.edge_index[eid], ann.twist))

    def f(tau, theta):
        tau = np.asarray(tau, dtype=np.float64)
        th = np.asarray(theta, dtype=np.float64).copy()
        for col, m in shears:
            th[col] = th[col] + m * math.pi * tau[col]
        rep = build_representation(surf, tau, th)
        out = 1.0
        for atom in atoms:
            word, count = _atom_word(surf, atom)
            out *= (-rep.trace(word)) ** count
        return out

    return f


def hamiltonian(surface, eid: str):
    """The cuff-parameter observable h = arccos(-f/2)/pi of a core curve."""
    from . import curves as cv
    f = trace_function(cv.curve_core(surface, eid))

    def h(tau, theta):
        v = np.clip(-f(tau, theta) / 2.0, -1.0, 1.0)
        return math.acos(v) / math.pi

    return h


def poisson_bracket(f, g, tau, theta, cols, step: float = 1e-5) -> float:
    """{f, g} = sum over edges of df/dtau dg/dtheta - df/dtheta dg/dtau,
    by central differences at (tau, theta)."""
    tau = np.asarray(tau, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    total = 0.0

    def d(func, base_tau, base_theta, col, which):
        tp, tm = base_tau.copy(), base_tau.copy()
        hp, hm = base_theta.copy(), base_theta.copy()
        if which == "tau":
            tp[col] += step
            tm[col] -= step
        else:
            hp[col] += step
            hm[col] -= step
        return (func(tp, hp) - func(tm, hm)) / (2 * step)

    for col in cols:
        total += (d(f, tau, theta, col, "tau") * d(g, tau, theta, col, "theta")
                  - d(f, tau, theta, col, "theta") * d(g, tau, theta, col, "tau"))
    return total


def random_observable(surface, rng):
    """Random short product of library holonomies, as a trace observable."""
    names = {
        "punctured-torus": ["a", "b"],
        "four-holed-sphere": ["x1", "x2", "x3", "x4"],
        "genus2": ["Ce", "Cf", "Cg", "De", "Df", "Dg"],
    }.get(surface.name)
    if names is None:
        raise CapabilityError(f"no generators for surface {surface.name!r}")
    n = int(rng.integers(2, 5))
    word = " ".join(
        rng.choice(names) + ("~" if rng.random() < 0.5 else "")
        for _ in range(n))

    def f(tau, theta):
        rep = build_representation(surface, tau, theta)
        return -rep.trace(word)

    return f, word


# ---------- the angle lattice and character origins ----------


@dataclass
class AngleLattice:
    """Trivial-twist lattice of a surface, in units of pi per internal edge.

    The fine lattice has every edge angle stepping by pi; the coarse one
    is generated by 2 pi edge steps together with the simultaneous pi
    steps around each internal vertex.  Cosets of fine over coarse count
    the characters.
    """

    surface: object

    def __post_init__(self):
        surf = self.surface
        self.cols = [c for c in surf.internal_columns
                     if surf.edge_kind(c) != "leg"]
        ne = len(surf.edge_ids)
        rows = []
        for trip in surf.vertex_triples:
            # repeated loop-edge entries cancel mod 2
            vec = np.zeros(ne, dtype=np.uint8)
            for c in trip:
                if c in self.cols:
                    vec[c] ^= 1
            rows.append(vec)
        self._vertex_rows = np.array(rows, dtype=np.uint8) if rows else \
            np.zeros((0, ne), dtype=np.uint8)

    def contains(self, shift) -> bool:
        """Whether a pi-unit integer angle shift acts trivially."""
        v = np.asarray(shift, dtype=np.int64)
        if np.any(v % 1):
            return False
        par = (v % 2).astype(np.uint8)
        from .surface import _gf2_echelon, _gf2_solve
        ech = _gf2_echelon(self._vertex_rows) if len(self._vertex_rows) else None
        if ech is None:
            return not par.any()
        _, residue = _gf2_solve(ech, par)
        return not residue.any()

    def coset_representatives(self):
        """One pi-unit shift per character class (2^g of them)."""
        ne = len(self.surface.edge_ids)
        seen = []
        reps = []
        for bits in itertools.product((0, 1), repeat=len(self.cols)):
            v = np.zeros(ne, dtype=np.int64)
            for c, b in zip(self.cols, bits):
                v[c] = b
            if any(self.contains(v - u) for u in seen):
                continue
            seen.append(v.copy())
            reps.append(v)
        return reps


def origin_shift(chi_a, chi_b, surface) -> np.ndarray:
    """Angle shift (in radians per edge) turning chi_a's origin into chi_b's.

    The difference of two quadratic characters is linear, so it is realized
    by a half-period twist shift whose edge parities pair correctly with
    every basis cycle of the spine.  Planar surfaces return zero.
    """
    h1 = surface.h1
    ne = len(surface.edge_ids)
    if h1.dim == 0:
        return np.zeros(ne)
    want = []
    for i in range(h1.dim):
        coords = tuple(1 if j == i else 0 for j in range(h1.dim))
        want.append(chi_a.q(coords) ^ chi_b.q(coords))
    basis = np.array(h1.basis, dtype=np.uint8)
    cols = [c for c in surface.internal_columns
            if surface.edge_kind(c) != "leg"]
    for bits in itertools.product((0, 1), repeat=len(cols)):
        v = np.zeros(ne, dtype=np.uint8)
        for c, b in zip(cols, bits):
            v[c] = b
        if all(int(basis[i] @ v) % 2 == want[i] for i in range(h1.dim)):
            return v.astype(np.float64) * math.pi
    raise ValueError("no angle shift realizes the character difference")
