"""Fusion calculus and curve-operator assembly.

Matrix elements of curve operators are built from three ingredients: pants
reduction chains of elementary fusion coefficients, annulus gluing factors,
and (for curves crossing a joining edge twice) a recoupling change of
basis.  Closed trigonometric forms of the dual-curve coefficients serve as
the fast path; the recoupling route stays available as an independent slow
engine used for cross-validation and small levels.

Strand labels are colors minus one; quantum data lives in log space via
``qnum.SinTables``.
"""
from __future__ import annotations

import collections
import itertools
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import qnum
from . import curves as cv
from .qnum import Level, sin_tables

__all__ = [
    "CapabilityError", "coeff_F", "coeff_annulus", "pants_reduce",
    "candlestick_glue", "assemble_operator", "operator_coefficients",
    "CurveOperator", "compose", "loop_w", "joining_diag", "joining_offdiag",
    "dual_channel_block", "theta_net", "tet_net", "delta_loop",
    "adm_strand", "twist_phase",
]


class CapabilityError(NotImplementedError):
    """Configuration requiring a reduction move we do not implement."""


# ---------- elementary coefficients ----------


def coeff_F(eps: int, mu: int, a, b, c, r: int, strict: bool = True):
    """Trigon-removal coefficient F_{eps,mu}(a,b,c,r).

    The third edge keeps color a; the two fused edges move b -> b+eps and
    c -> c+mu.  Vectorized over color arrays; a negative radicand raises
    unless strict is off, in which case the entry is 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if eps == -1 and mu == 1:
        return coeff_F(1, -1, a, c, b, r, strict)
    if eps == 1 and mu == 1:
        sign, n1, n2 = 1.0, (a + b + c + 1) / 2, (b + c - a + 1) / 2
    elif eps == 1 and mu == -1:
        sign, n1, n2 = -1.0, (a - b + c - 1) / 2, (a + b - c - 1) / 2
    elif eps == -1 and mu == -1:
        sign, n1, n2 = -1.0, (a + b + c - 1) / 2, (b + c - a - 1) / 2
    else:
        raise ValueError("eps and mu must be +1 or -1")
    rad = qnum.qsin(n1, r) * qnum.qsin(n2, r) / (qnum.qsin(b, r) * qnum.qsin(c, r))
    rad = np.asarray(rad)
    if strict and np.any(rad < -1e-13):
        raise ValueError("negative radicand: inadmissible fusion input")
    out = sign * np.sqrt(np.maximum(rad, 0.0))
    return out if out.ndim else float(out)


def coeff_annulus(family: str, sign: int, n, r: int):
    """Annulus move coefficients G, H, L with their unit phases.

    All six carry the modulus (<n+sign>/<n>)^(1/2) and the parity sign
    (-1)^(n+1); they differ in the phase angle attached to the move.
    """
    n = np.asarray(n, dtype=np.float64)
    if np.any((n + sign < 1) | (n + sign > r - 1) | (n < 1) | (n > r - 1)):
        raise ValueError("color out of range for an annulus move")
    mod = np.sqrt(qnum.qsin(n + sign, r) / qnum.qsin(n, r))
    par = np.where(np.asarray(n, dtype=np.int64) % 2 == 0, -1.0, 1.0)
    if family == "G":
        ang = -(n - 1) if sign > 0 else (n + 1)
    elif family == "H":
        ang = (n - 1) if sign > 0 else -(n + 1)
    elif family == "L":
        ang = (n + 2) if sign > 0 else -(n - 2)
    else:
        raise ValueError(f"unknown annulus family {family!r}")
    out = par * mod * np.exp(1j * np.pi * ang / r)
    return out if out.ndim else complex(out)


def pants_reduce(arc_counts, colors, shifts, r: int):
    """Reduce a pants crossed by pairwise arcs to a product of F factors.

    arc_counts = (alpha, beta, gamma) arcs joining boundary pairs (b,c),
    (a,c), (a,b).  shifts = (eps, mu, nu): per-crossing signs moving a, b,
    c, consumed in that boundary order.  Fusion removes alpha arcs first,
    then beta, then gamma, threading partial color shifts through; a
    vanishing or out-of-range intermediate gives 0.
    """
    alpha, beta, gamma = arc_counts
    eps, mu, nu = (list(s) for s in shifts)
    if len(eps) != beta + gamma or len(mu) != alpha + gamma or len(nu) != alpha + beta:
        raise ValueError("shift tuples do not match arc counts")
    a, b, c = colors
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    total = np.ones(np.broadcast(a, b, c).shape or (1,))

    def in_range(x):
        return (x >= 1) & (x <= r - 1)

    for i in range(alpha):
        total = total * coeff_F(mu[i], nu[i], a, b, c, r, strict=False)
        b, c = b + mu[i], c + nu[i]
        total = np.where(in_range(b) & in_range(c), total, 0.0)
    for i in range(beta):
        total = total * coeff_F(eps[i], nu[alpha + i], b, a, c, r, strict=False)
        a, c = a + eps[i], c + nu[alpha + i]
        total = np.where(in_range(a) & in_range(c), total, 0.0)
    for i in range(gamma):
        total = total * coeff_F(eps[beta + i], mu[alpha + i], c, a, b, r, strict=False)
        a, b = a + eps[beta + i], b + mu[alpha + i]
        total = np.where(in_range(a) & in_range(b), total, 0.0)
    return total if total.ndim else float(total)


def candlestick_glue(n, eps, mu, r: int):
    """Glue two candlesticks along their legs.

    Legs pair up in order; aligned sign pairs telescope through bigon
    eliminations, each contributing (<n+S_k+1>/<n+S_k>)^(1/2).  A total
    shift mismatch gives exactly 0.  Oppositely-signed pairs would need
    the leg-exchange move, which we do not implement.
    """
    eps, mu = list(eps), list(mu)
    if len(eps) != len(mu):
        raise ValueError("candlestick leg counts differ")
    if any(abs(e) != 1 for e in itertools.chain(eps, mu)):
        raise ValueError("leg signs must be +1 or -1")
    if sum(eps) != sum(mu):
        return 0.0
    if eps != mu:
        raise CapabilityError(
            "misaligned candlestick legs need the leg-exchange move")
    total = 1.0
    cur = float(n)
    for e in eps:
        nxt = cur + e
        if not (0 < cur < r) or not (0 < nxt < r):
            return 0.0
        total *= float(np.sqrt(qnum.qsin(nxt, r) / qnum.qsin(cur, r)))
        cur = nxt
    return total


def twist_phase(k, c, m: int, r: int):
    """Phase on the k-shift coefficient at color c under m annulus twists."""
    c = np.asarray(c, dtype=np.float64)
    return np.exp(1j * np.pi * m * k * (2.0 * c + k) / (2.0 * r))


# ---------- closed forms (angle arguments in radians) ----------


def loop_w(tau, alpha, h):
    """Dual-curve shift coefficient on a loop edge at angles (tau, alpha)."""
    tau = np.asarray(tau, dtype=np.float64)
    val = (np.sin(tau + alpha / 2 + h / 2) * np.sin(tau - alpha / 2 + h / 2)
           / (np.sin(tau) * np.sin(tau + h)))
    out = np.sqrt(np.maximum(val, 0.0))
    return out if out.ndim else float(out)


def joining_diag(tx1, ty1, tx2, ty2, te, h):
    """No-shift dual-curve term on a joining edge, interior angles only.

    (tx1, ty1) flank the first pants, (tx2, ty2) the second; te is the
    joining-edge angle.  The expression has removable singularities at
    te = h and te = pi - h; the color-space wrapper handles the walls.
    """
    te = np.asarray(te, dtype=np.float64)
    t1 = 2 * np.cos(ty2 + ty1 - h)
    t2 = (4 * np.sin((tx1 + ty1 - te - h) / 2) * np.sin((tx1 - ty1 + te + h) / 2)
          * np.sin((tx2 + ty2 - te - h) / 2) * np.sin((tx2 - ty2 + te + h) / 2)
          / (np.sin(te) * np.sin(te + h)))
    t3 = (4 * np.sin((tx1 + ty1 + te - h) / 2) * np.sin((-tx1 + ty1 + te - h) / 2)
          * np.sin((tx2 + ty2 + te - h) / 2) * np.sin((-tx2 + ty2 + te - h) / 2)
          / (np.sin(te) * np.sin(te - h)))
    out = t1 + t2 + t3
    return out if out.ndim else float(out)


def joining_offdiag(tx1, ty1, tx2, ty2, te, h):
    """Two-step dual-curve term on a joining edge (edge angle te -> te + 2h)."""
    te = np.asarray(te, dtype=np.float64)
    g1 = (np.sin((tx1 + ty1 - te - h) / 2) * np.sin((tx1 - ty1 + te + h) / 2)
          * np.sin((tx2 + ty2 - te - h) / 2) * np.sin((tx2 - ty2 + te + h) / 2))
    g2 = (np.sin((tx1 + ty1 + te + h) / 2) * np.sin((-tx1 + ty1 + te + h) / 2)
          * np.sin((tx2 + ty2 + te + h) / 2) * np.sin((-tx2 + ty2 + te + h) / 2))
    rad = 16 * g1 * g2 / (np.sin(te) * np.sin(te + h) ** 2 * np.sin(te + 2 * h))
    out = np.sqrt(np.maximum(rad, 0.0))
    return out if out.ndim else float(out)


def _joining_diag_colors(ce, tx1, ty1, tx2, ty2, r: int):
    """joining_diag over integer edge colors, walls handled exactly.

    At ce = 1 admissibility forces equal flanking colors, so the singular
    te = h term carries a double numerator zero and drops out; at
    ce = r - 1 the flanking sums equal r and the te + h term drops the
    same way.
    """
    ce = np.asarray(ce, dtype=np.int64)
    h = np.pi / r
    te = np.pi * ce.astype(np.float64) / r
    lo = ce == 1
    hi = ce == r - 1
    t1 = 2 * np.cos(ty2 + ty1 - h)
    d2 = np.where(hi, 1.0, np.sin(te) * np.sin(te + h))
    t2 = (4 * np.sin((tx1 + ty1 - te - h) / 2) * np.sin((tx1 - ty1 + te + h) / 2)
          * np.sin((tx2 + ty2 - te - h) / 2) * np.sin((tx2 - ty2 + te + h) / 2) / d2)
    d3 = np.where(lo, 1.0, np.sin(te) * np.sin(te - h))
    t3 = (4 * np.sin((tx1 + ty1 + te - h) / 2) * np.sin((-tx1 + ty1 + te - h) / 2)
          * np.sin((tx2 + ty2 + te - h) / 2) * np.sin((-tx2 + ty2 + te - h) / 2) / d3)
    return t1 + np.where(hi, 0.0, t2) + np.where(lo, 0.0, t3)


def _hsin(n, r: int):
    """sin(pi n / (2r)) over integers, exact zeros at multiples of 2r."""
    n = np.asarray(n, dtype=np.int64)
    rem = n % (4 * r)
    return np.where(rem % (2 * r) == 0, 0.0, np.sin(np.pi * rem / (2 * r)))


def _joining_offdiag_colors(ce, cx1, cy1, cx2, cy2, r: int):
    """joining_offdiag over integer colors, walls exact.

    Every numerator sine sits on the half-angle integer grid, so shifted
    colorings that break admissibility get a true zero; the float route
    would leave sqrt-of-rounding ghosts of order 1e-8 there.
    """
    ce = np.asarray(ce, dtype=np.int64)
    ok = (ce >= 1) & (ce + 2 <= r - 1)
    ces = np.where(ok, ce, 1)
    g1 = (_hsin(cx1 + cy1 - ces - 1, r) * _hsin(cx1 - cy1 + ces + 1, r)
          * _hsin(cx2 + cy2 - ces - 1, r) * _hsin(cx2 - cy2 + ces + 1, r))
    g2 = (_hsin(cx1 + cy1 + ces + 1, r) * _hsin(-cx1 + cy1 + ces + 1, r)
          * _hsin(cx2 + cy2 + ces + 1, r) * _hsin(-cx2 + cy2 + ces + 1, r))
    te = np.pi * ces / r
    h = np.pi / r
    rad = 16 * g1 * g2 / (np.sin(te) * np.sin(te + h) ** 2 * np.sin(te + 2 * h))
    return np.where(ok, np.sqrt(np.maximum(rad, 0.0)), 0.0)


def _loop_w_colors(ce, cf, eps: int, r: int):
    """loop_w over integer colors, walls exact.

    The numerator sines have integer multiples of pi/(2r) as arguments;
    building them from those integers makes the coefficient vanish
    exactly, not merely to rounding, whenever the shifted coloring breaks
    a triangle or sum condition at the loop vertex.
    """
    ce = np.asarray(ce, dtype=np.int64)
    cf = np.asarray(cf, dtype=np.int64)
    ok = (ce + eps >= 1) & (ce + eps <= r - 1)
    n1 = 2 * ce + cf + eps
    n2 = 2 * ce - cf + eps
    s1 = np.where(n1 % (2 * r) == 0, 0.0, np.sin(np.pi * (n1 % (4 * r)) / (2 * r)))
    s2 = np.where(n2 % (2 * r) == 0, 0.0, np.sin(np.pi * (n2 % (4 * r)) / (2 * r)))
    ces = np.where(ok, ce, 2)
    den = np.sin(np.pi * ces / r) * np.sin(np.pi * (ces + eps) / r)
    val = np.sqrt(np.maximum(s1 * s2 / den, 0.0))
    return np.where(ok, val, 0.0)


# ---------- recoupling nets (strand labels) ----------


def adm_strand(x: int, y: int, z: int, r: int) -> bool:
    if (x + y + z) % 2:
        return False
    if x + y < z or y + z < x or z + x < y:
        return False
    return x + y + z <= 2 * r - 4


def _fact1(st: qnum.SinTables, n: int):
    """log and sign of the quantum factorial [n]!, normalized by <1>."""
    if n < 0:
        return -np.inf, 0.0
    return float(st.logf[n] - n * st.log[1]), float(st.signf[n])


def delta_loop(k: int, st: qnum.SinTables) -> float:
    """Closed loop of strand label k: (-1)^k [k+1]."""
    return (-1.0) ** k * float(st.sign[k + 1] * np.exp(st.log[k + 1] - st.log[1]))


def theta_net(x: int, y: int, z: int, st: qnum.SinTables) -> float:
    """Trivalent theta net on strand labels."""
    if not adm_strand(x, y, z, st.r):
        return 0.0
    m, n, p = (x + y - z) // 2, (y + z - x) // 2, (z + x - y) // 2
    lg, sg = 0.0, (-1.0) ** (m + n + p)
    for a in (m + n + p + 1, m, n, p):
        l, s = _fact1(st, a)
        lg += l
        sg *= s
    for a in (m + n, n + p, p + m):
        l, s = _fact1(st, a)
        lg -= l
        sg *= s
    return sg * float(np.exp(lg))


def tet_net(triads, st: qnum.SinTables) -> float:
    """Tetrahedral net from its four vertex triads (strand labels).

    The six edges are recovered by pairing equal labels across triads so
    that opposite edges never share a triad; specifying the net this way
    keeps any symbol-ordering convention out of the interface.
    """
    r = st.r
    for t in triads:
        if not adm_strand(*t, r):
            return 0.0
    edges, pairs = _tet_edge_pairing(triads)
    a = [sum(t) // 2 for t in triads]
    total = sum(v for v, _ in edges)
    b = [(total - x - y) // 2 for x, y in pairs]
    lo, hi = max(a), min(b)
    if lo > hi:
        return 0.0
    lg, sg = 0.0, 1.0
    for bj in b:
        for ai in a:
            l, s = _fact1(st, bj - ai)
            lg += l
            sg *= s
    for v, _ in edges:
        l, s = _fact1(st, v)
        lg -= l
        sg *= s
    tot = 0.0
    for s_ in range(lo, hi + 1):
        l1, g1 = _fact1(st, s_ + 1)
        den_l, den_s = 0.0, 1.0
        for ai in a:
            l, s2 = _fact1(st, s_ - ai)
            den_l += l
            den_s *= s2
        for bj in b:
            l, s2 = _fact1(st, bj - s_)
            den_l += l
            den_s *= s2
        tot += (-1.0) ** s_ * g1 * den_s * np.exp(l1 - den_l + lg)
    return sg * tot


def _tet_edge_pairing(triads):
    """Pair the twelve triad slots into six edges, opposite edges
    triad-disjoint; returns (edges as (label, triad-pair), opposite pairs)."""
    byval = collections.defaultdict(list)
    for i, t in enumerate(triads):
        for v in t:
            byval[v].append(i)

    def pairings(items):
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for k, other in enumerate(rest):
            for tail in pairings(rest[:k] + rest[k + 1:]):
                yield [(first, other)] + tail

    candidates = [[]]
    for v, tris in byval.items():
        new = []
        for p in pairings(tris):
            if any(x == y for x, y in p):
                continue
            for c in candidates:
                new.append(c + [(v, frozenset(xy)) for xy in p])
        candidates = new
    for cand in candidates:
        if len(cand) != 6:
            continue
        pairs, used, ok = [], [False] * 6, True
        for i in range(6):
            if used[i]:
                continue
            vi, si = cand[i]
            hit = False
            for j in range(i + 1, 6):
                if used[j]:
                    continue
                vj, sj = cand[j]
                if si & sj:
                    continue
                used[i] = used[j] = True
                pairs.append((vi, vj))
                hit = True
                break
            if not hit:
                ok = False
                break
        if ok and len(pairs) == 3:
            return cand, pairs
    raise ValueError("triads do not form a tetrahedron")


@lru_cache(maxsize=8192)
def dual_channel_block(cx1: int, cy1: int, cx2: int, cy2: int, r: int,
                       dtype=np.float64):
    """Dual-curve operator block over the channel colors of a joining edge.

    The edge's two pants have flanking colors (cx1, cy1) and (cx2, cy2).
    Conjugates the diagonal operator of the crossed channel back through
    the recoupling unitary, then gauge-fixes basis signs so every upward
    entry is negative.  Returns (channel colors, diag, upward off-diag).

    The alternating recoupling sums cancel down about seven digits by
    r = 200, so the extended-precision dtype is offered for tight
    cross-route comparisons.
    """
    st = sin_tables(r, dtype)
    x1, y1, x2, y2 = cx1 - 1, cy1 - 1, cx2 - 1, cy2 - 1
    ns = np.array([n for n in range(2 * r)
                   if adm_strand(x1, y1, n, r) and adm_strand(x2, y2, n, r)],
                  dtype=np.int64)
    ms = np.array([m for m in range(2 * r)
                   if adm_strand(x1, x2, m, r) and adm_strand(y1, y2, m, r)],
                  dtype=np.int64)
    if len(ns) == 0:
        return ns + 1, np.zeros(0), np.zeros(0)
    if len(ms) != len(ns):
        raise ValueError("recoupling channel dimensions disagree")
    U = _recoupling_matrix(x1, y1, x2, y2, ns, ms, st)
    eig = -2.0 * np.cos(np.pi * (ms + 1) / r)
    T = U.T @ (eig[:, None] * U)
    s = np.ones(len(ns))
    for j in range(len(ns) - 1):
        s[j + 1] = -1.0 if s[j] * T[j + 1, j] > 0 else 1.0
    Tg = s[:, None] * T * s[None, :]
    diag = np.diag(Tg).copy()
    off = Tg[np.arange(1, len(ns)), np.arange(len(ns) - 1)].copy()
    return ns + 1, diag, off


def _recoupling_matrix(x1, y1, x2, y2, ns, ms, st: qnum.SinTables):
    """Vectorized recoupling unitary between the two channel bases."""
    n2 = ns[None, :]
    m2 = ms[:, None]
    zero = n2 * 0 + m2 * 0
    A = [(x1 + y1 + n2) // 2 + zero, (x2 + y2 + n2) // 2 + zero,
         (x1 + x2 + m2) // 2 + zero, (y1 + y2 + m2) // 2 + zero]
    tot = x1 + y1 + x2 + y2 + n2 + m2
    B = [(tot - n2 - m2) // 2 + zero, (tot - x1 - y2) // 2 + zero,
         (tot - y1 - x2) // 2 + zero]
    lo = np.maximum.reduce(A)
    hi = np.minimum.reduce(B)
    width = int(max(0, int((hi - lo).max()) + 1))

    logf, signf = _strand_fact_tables(st)

    lg = np.zeros(lo.shape, dtype=logf.dtype)
    sg = np.ones(lo.shape, dtype=logf.dtype)
    for bj in B:
        for ai in A:
            d = bj - ai
            neg = d < 0
            di = np.where(neg, 0, d)
            lg += np.where(neg, -np.inf, logf[di])
            sg *= np.where(neg, 0.0, signf[di])
    for e in (n2 + 0 * m2, m2 + 0 * n2):
        lg -= logf[e]
        sg *= signf[e]
    for e in (x1, y1, x2, y2):
        lg -= logf[e]
        sg *= signf[e]

    sval = lo[None, :, :] + np.arange(width)[:, None, None]
    ok = sval <= hi[None, :, :]
    svals = np.where(ok, sval, 0)
    num_l = logf[svals + 1]
    num_s = signf[svals + 1] * np.where(svals % 2 == 0, 1.0, -1.0)
    den_l = np.zeros_like(num_l)
    den_s = np.ones_like(num_s)
    for ai in A:
        d = np.where(ok, sval - ai[None, :, :], 0)
        den_l += logf[d]
        den_s *= signf[d]
    for bj in B:
        d = np.where(ok, bj[None, :, :] - sval, 0)
        den_l += logf[d]
        den_s *= signf[d]
    # a vanishing denominator factorial cancels against the prefactor zero
    good = ok & (den_s != 0) & np.isfinite(lg)[None, :, :]
    den_l = np.where(good, den_l, 0.0)
    exponent = np.where(good, num_l - den_l + lg[None, :, :], -np.inf)
    terms = np.where(good, num_s * den_s, 0.0) * np.exp(exponent)
    tet = sg * terms.sum(axis=0)

    th1 = _theta_array(x1, y1, ns, st)
    th2 = _theta_array(x2, y2, ns, st)
    th3 = _theta_array(x1, x2, ms, st)
    th4 = _theta_array(y1, y2, ms, st)
    dn = np.abs(_delta_array(ns, st))[None, :] * np.abs(_delta_array(ms, st))[:, None]
    den = np.sqrt(np.abs(th1 * th2)[None, :] * np.abs(th3 * th4)[:, None])
    return tet * np.sqrt(dn) / den


def _strand_fact_tables(st: qnum.SinTables):
    """Quantum-factorial tables normalized so [n] = <n>/<1>."""
    n = np.arange(len(st.logf))
    return st.logf - n * st.log[1], st.signf.copy()


def _theta_array(x: int, y: int, zs, st: qnum.SinTables):
    r = st.r
    zs = np.asarray(zs, dtype=np.int64)
    ok = np.array([adm_strand(x, y, int(z), r) for z in zs])
    zz = np.where(ok, zs, x + y)
    m = (x + y - zz) // 2
    n = (y + zz - x) // 2
    p = (zz + x - y) // 2
    logf, signf = _strand_fact_tables(st)
    lg = (logf[m + n + p + 1] + logf[m] + logf[n] + logf[p]
          - logf[m + n] - logf[n + p] - logf[p + m])
    sg = (signf[m + n + p + 1] * signf[m] * signf[n] * signf[p]
          * signf[m + n] * signf[n + p] * signf[p + m])
    val = np.where((m + n + p) % 2 == 0, 1.0, -1.0) * sg * np.exp(lg)
    return np.where(ok, val, 0.0)


def _delta_array(ks, st: qnum.SinTables):
    ks = np.asarray(ks, dtype=np.int64)
    val = st.sign[ks + 1] * np.exp(st.log[ks + 1] - st.log[1])
    return np.where(ks % 2 == 0, 1.0, -1.0) * val


# ---------- per-edge dual-curve coefficient tables ----------


def _loop_context(surf, col):
    """The loop edge's vertex index and the column of its third edge."""
    end_a, _ = surf.edge_ends[col]
    vid = surf._end_vertex[end_a]
    vi = surf.internal_vertex_ids.index(vid)
    other = [c for c in surf.vertex_triples[vi] if c != col]
    if len(other) != 1:
        raise CapabilityError("loop vertex with unexpected edge pattern")
    return vi, other[0]


def _joining_context(surf, col):
    """Flanking color columns (x1, y1), (x2, y2) of a joining edge.

    Flanking edges are taken in column order within each pants; this pins
    which of the two dual-curve shapes the operator realizes.
    """
    out = []
    for end in surf.edge_ends[col]:
        vid = surf._end_vertex[end]
        vi = surf.internal_vertex_ids.index(vid)
        other = sorted(c for c in surf.vertex_triples[vi] if c != col)
        if len(other) != 2:
            raise CapabilityError("joining edge flanked by a loop vertex")
        out.append(tuple(other))
    (x1c, y1c), (x2c, y2c) = out
    return x1c, y1c, x2c, y2c


def _dual_coeffs_closed(level: Level, colors: np.ndarray, col: int, surf) -> dict:
    """Closed-form dual-curve coefficients at the given coloring rows."""
    r = level.r
    if surf.edge_kind(col) == "loop":
        _, fcol = _loop_context(surf, col)
        ce = colors[:, col]
        cf = colors[:, fcol]
        return {(col, +1): _loop_w_colors(ce, cf, +1, r) + 0j,
                (col, -1): _loop_w_colors(ce, cf, -1, r) + 0j}
    x1c, y1c, x2c, y2c = _joining_context(surf, col)
    ce = colors[:, col]
    ang = np.pi / r
    tx1 = ang * colors[:, x1c].astype(np.float64)
    ty1 = ang * colors[:, y1c].astype(np.float64)
    tx2 = ang * colors[:, x2c].astype(np.float64)
    ty2 = ang * colors[:, y2c].astype(np.float64)
    diag = _joining_diag_colors(ce, tx1, ty1, tx2, ty2, r)
    cx1, cy1 = colors[:, x1c], colors[:, y1c]
    cx2, cy2 = colors[:, x2c], colors[:, y2c]
    up = _joining_offdiag_colors(ce, cx1, cy1, cx2, cy2, r)
    dn = _joining_offdiag_colors(ce - 2, cx1, cy1, cx2, cy2, r)
    return {(col, 0): -diag + 0j, (col, +2): -up + 0j, (col, -2): -dn + 0j}


def _dual_coeffs_recoupling(level: Level, colors: np.ndarray, col: int, surf) -> dict:
    """Recoupling-route dual-curve coefficients (joining edges only)."""
    r = level.r
    x1c, y1c, x2c, y2c = _joining_context(surf, col)
    n = len(colors)
    diag = np.zeros(n)
    up = np.zeros(n)
    dn = np.zeros(n)
    dtype = np.longdouble if r > 128 else np.float64
    for i in range(n):
        ns, d0, off = dual_channel_block(
            int(colors[i, x1c]), int(colors[i, y1c]),
            int(colors[i, x2c]), int(colors[i, y2c]), r, dtype)
        ce = int(colors[i, col])
        j = int(np.searchsorted(ns, ce))
        if j >= len(ns) or ns[j] != ce:
            continue
        diag[i] = d0[j]
        up[i] = off[j] if j < len(off) else 0.0
        dn[i] = off[j - 1] if j >= 1 else 0.0
    return {(col, 0): diag + 0j, (col, +2): up + 0j, (col, -2): dn + 0j}


def _loop_coeffs_chain(level: Level, colors: np.ndarray, col: int, surf) -> dict:
    """Pants-chain route for the loop-edge dual curve.

    One pairwise arc joins the two loop-boundary slots; the annulus
    contributes a single bigon factor and the crossing orientation sign.
    """
    r = level.r
    _, fcol = _loop_context(surf, col)
    ce = colors[:, col].astype(np.float64)
    cf = colors[:, fcol].astype(np.float64)
    out = {}
    for eps, cross_sign in ((+1, 1.0), (-1, -1.0)):
        ok = (ce + eps >= 1) & (ce + eps <= r - 1)
        chain = pants_reduce((0, 0, 1), (ce, ce, cf), ((eps,), (eps,), ()), r)
        denom = np.where(ok, qnum.qsin(ce + eps, r), 1.0)
        glue = np.sqrt(np.maximum(qnum.qsin(ce, r) / denom, 0.0))
        out[(col, eps)] = np.where(ok, chain * glue * cross_sign, 0.0) + 0j
    return out


# ---------- operator assembly ----------


class CurveOperator:
    """Sparse curve operator in the normalized coloring basis.

    coeffs maps each shift vector k (a tuple over edges) to a complex
    array over the coloring set: the amplitude attached to the transition
    from coloring c to c + k, sign cocycle included.
    """

    def __init__(self, level: Level, surface, coloring_set: qnum.ColoringSet,
                 coeffs: dict, n_components: int = 1, label: str = ""):
        self.level = level
        self.surface = surface
        self.colorings = coloring_set
        self.coeffs = {tuple(k): np.asarray(v, dtype=np.complex128)
                       for k, v in coeffs.items()}
        self.n_components = n_components
        self.label = label

    @property
    def dim(self) -> int:
        return len(self.colorings)

    def shift_vectors(self):
        return sorted(self.coeffs)

    def matrix(self) -> sp.csr_matrix:
        cols_arr = self.colorings.array
        n = self.dim
        rows, colixs, data = [], [], []
        for k, vals in self.coeffs.items():
            kv = np.asarray(k, dtype=np.int64)
            tgt = self.colorings.lookup(cols_arr + kv)
            mask = (tgt >= 0) & (np.abs(vals) > 0)
            rows.append(tgt[mask])
            colixs.append(np.nonzero(mask)[0])
            data.append(vals[mask])
        if not rows:
            return sp.csr_matrix((n, n), dtype=np.complex128)
        return sp.csr_matrix(
            (np.concatenate(data),
             (np.concatenate(rows), np.concatenate(colixs))),
            shape=(n, n), dtype=np.complex128)

    def diagonal(self) -> np.ndarray:
        zero = tuple([0] * len(self.surface.edge_ids))
        return self.coeffs.get(zero, np.zeros(self.dim, dtype=np.complex128))

    def hermiticity_defect(self) -> float:
        m = self.matrix()
        d = (m - m.getH()).tocoo()
        return 0.0 if d.nnz == 0 else float(np.abs(d.data).max())

    def opnorm(self) -> float:
        """Largest |eigenvalue|; assumes the operator is Hermitian."""
        m = self.matrix()
        if m.shape[0] <= 4:
            return float(np.linalg.norm(m.toarray(), 2))
        lam = spla.eigsh(m, k=1, which="LM", return_eigenvectors=False,
                         tol=1e-9, maxiter=10000)
        return float(np.abs(lam[0]))

    def max_abs_coefficient(self) -> float:
        vals = [float(np.abs(v).max()) for v in self.coeffs.values() if len(v)]
        return max(vals) if vals else 0.0


def compose(op_a: CurveOperator, op_b: CurveOperator) -> CurveOperator:
    """Operator product a.b via shift convolution (a acts second)."""
    if op_a.level.r != op_b.level.r:
        raise ValueError("operator levels differ")
    if op_a.surface.cache_key != op_b.surface.cache_key:
        raise ValueError("operators live on different graphs")
    cols_arr = op_b.colorings.array
    out: dict = {}
    for kb, vb in op_b.coeffs.items():
        kbv = np.asarray(kb, dtype=np.int64)
        mid = op_a.colorings.lookup(cols_arr + kbv)
        ok = mid >= 0
        for ka, va in op_a.coeffs.items():
            key = tuple(int(x + y) for x, y in zip(ka, kb))
            term = np.zeros(len(cols_arr), dtype=np.complex128)
            term[ok] = va[mid[ok]] * vb[ok]
            if key in out:
                out[key] += term
            else:
                out[key] = term
    out = {k: v for k, v in out.items() if np.abs(v).max() > 0}
    return CurveOperator(op_a.level, op_a.surface, op_b.colorings, out,
                         op_a.n_components + op_b.n_components,
                         label=f"{op_a.label}.{op_b.label}")


_RECOUPLING_CUTOFF = 40


def operator_coefficients(spec: cv.MulticurveSpec, level: Level,
                          colors: np.ndarray, engine: str = "auto") -> dict:
    """Transition coefficients of the curve operator at given coloring rows.

    Returns {shift vector: complex array}; rows are colorings in the
    surface's edge order and must be admissible.  engine: "closed" uses
    the trigonometric fast path, "recoupling" the slow channel route,
    "auto" switches on level size.
    """
    surf = spec.surface
    colors = np.atleast_2d(np.asarray(colors, dtype=np.int64))
    ne = len(surf.edge_ids)
    nrows = len(colors)
    r = level.r

    factors = []
    diag_total = np.ones(nrows, dtype=np.complex128)

    for eid, ann in sorted(spec.annuli.items()):
        col = surf.edge_index[eid]
        if ann.pattern == 3:
            raise CapabilityError(
                f"edge {eid}: strand-exchange annulus pattern is not implemented")
        if ann.pattern == 1:
            ce = colors[:, col].astype(np.float64)
            diag_total = diag_total * (-2.0 * np.cos(np.pi * ce / r)) ** ann.count
            continue
        kind = surf.edge_kind(col)
        per_copy = 1 if kind == "loop" else 2
        if ann.count % per_copy:
            raise CapabilityError(
                f"edge {eid}: {ann.count} strands do not split into dual-curve copies")
        copies = ann.count // per_copy
        _check_dual_pants(spec, surf, col, copies)
        factors.append((col, kind, copies, ann.twist))

    coeffs = {tuple([0] * ne): diag_total}
    for col, kind, copies, twist in factors:
        table = _single_dual_table(level, kind, col, surf, engine)
        for _ in range(copies):
            coeffs = _convolve_edge(coeffs, table, colors, twist, level, surf)
    sign = cv.cocycle_sign(colors, spec).astype(np.complex128)
    return {k: v * sign for k, v in coeffs.items()}


def _single_dual_table(level, kind, col, surf, engine):
    if kind == "loop":
        if engine == "recoupling":
            return lambda rows: _loop_coeffs_chain(level, rows, col, surf)
        return lambda rows: _dual_coeffs_closed(level, rows, col, surf)
    if engine == "recoupling" or (engine == "auto" and level.r <= _RECOUPLING_CUTOFF):
        return lambda rows: _dual_coeffs_recoupling(level, rows, col, surf)
    return lambda rows: _dual_coeffs_closed(level, rows, col, surf)


def _check_dual_pants(spec, surf, col, copies):
    """The pants data must present exactly the dual-curve arcs at this edge."""
    kind = surf.edge_kind(col)
    end_a, end_b = surf.edge_ends[col]
    if kind == "loop":
        vid = surf._end_vertex[end_a]
        arcs = spec.pants.get(vid, cv.PantsArcs())
        vi = surf.internal_vertex_ids.index(vid)
        slots = tuple(sorted(i for i, (c, _) in enumerate(surf.vertex_slots[vi])
                             if c == col))
        which = {(1, 2): "alpha", (0, 2): "beta", (0, 1): "gamma"}[slots]
        if getattr(arcs, which) != copies or any(arcs.turnbacks):
            raise CapabilityError(
                "pants arcs at a loop edge do not form parallel dual curves")
    else:
        for end in (end_a, end_b):
            vid = surf._end_vertex[end]
            arcs = spec.pants.get(vid, cv.PantsArcs())
            vi = surf.internal_vertex_ids.index(vid)
            slot = next(i for i, (c, _) in enumerate(surf.vertex_slots[vi])
                        if c == col)
            if arcs.turnbacks[slot] != copies or arcs.alpha or arcs.beta or arcs.gamma:
                raise CapabilityError(
                    "pants arcs at a joining edge do not form parallel dual curves")


def _convolve_edge(coeffs, table, colors, twist, level, surf):
    """Convolve accumulated shift coefficients with one dual-curve factor.

    The factor's coefficients are evaluated at the colors shifted by the
    accumulated shift vector; transitions through inadmissible
    intermediates contribute nothing.
    """
    out = {}
    for k0, v0 in coeffs.items():
        shifted = colors + np.asarray(k0, dtype=np.int64)
        ok = _rows_admissible(shifted, surf, level)
        safe = np.where(ok[:, None], shifted, 1)
        for (tcol, dk), fv in table(safe).items():
            fv = np.where(ok, fv, 0.0)
            if twist:
                fv = fv * twist_phase(dk, safe[:, tcol].astype(np.float64),
                                      twist, level.r)
            key = list(k0)
            key[tcol] += dk
            key = tuple(key)
            term = fv * v0
            if key in out:
                out[key] += term
            else:
                out[key] = term
    return {k: v for k, v in out.items() if len(v) and np.abs(v).max() > 0}


def _rows_admissible(colors: np.ndarray, surf, level: Level) -> np.ndarray:
    """Vectorized admissibility over coloring rows (legs assumed pinned)."""
    r = level.r
    ok = np.all((colors >= 1) & (colors <= r - 1), axis=1)
    for (i, j, k) in surf.vertex_triples:
        a, b, c = colors[:, i], colors[:, j], colors[:, k]
        ok &= (a + b + c) % 2 == 1
        ok &= (np.abs(a - b) < c) & (c < a + b)
        ok &= a + b + c < 2 * r
    return ok


def assemble_operator(spec: cv.MulticurveSpec, level: Level,
                      engine: str = "auto") -> CurveOperator:
    """Build the sparse curve operator over the admissible coloring set."""
    cset = qnum.coloring_set(spec.surface, level)
    coeffs = operator_coefficients(spec, level, cset.array, engine=engine)
    cleaned = {}
    for k, v in coeffs.items():
        kv = np.asarray(k, dtype=np.int64)
        if not kv.any():
            cleaned[k] = v
            continue
        tgt = cset.lookup(cset.array + kv)
        vv = np.where(tgt >= 0, v, 0.0)
        if np.abs(vv).max() > 0:
            cleaned[k] = vv
    return CurveOperator(level, spec.surface, cset, cleaned,
                         spec.n_components, label=spec.label)
