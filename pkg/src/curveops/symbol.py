"""Symbol assembly and asymptotic extrapolation in hbar = 1/r.

A symbol sample is one matrix row of a curve operator read off at a
coloring anchored near tau * r; sweeping the level r at fixed tau and
fitting powers of hbar extracts the limit coefficients, their first-order
correction, and the correction predicted by the tau-theta mixed
derivative.  Everything works row-wise, so levels in the thousands stay
cheap even when the full coloring set would not fit in memory.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import curves as cv
from . import fusion, qnum
from .qnum import Level

__all__ = [
    "AnchorError", "FitError", "PsiSymbol", "AsymptoticFit",
    "nearest_coloring", "symbol_sample", "symbol_from_operator",
    "extrapolate", "tau_derivative", "delta_coefficients", "default_term",
    "composite_row", "first_order_report", "residual_slope",
]


class AnchorError(ValueError):
    """No admissible coloring close enough to the requested tau."""


class FitError(ValueError):
    """Extrapolation fit is ill-conditioned or under-determined."""


# ---------- anchors ----------


def nearest_coloring(surface, level: Level, tau, window: int = 3) -> np.ndarray:
    """Admissible coloring nearest to tau * r (sup distance, lex ties).

    Searches a +-window box around the rounded target on internal edges;
    legs are pinned by the level.  Raises AnchorError when nothing
    admissible lies within sup distance 2.
    """
    r = level.r
    tau = np.asarray(tau, dtype=np.float64)
    ne = len(surface.edge_ids)
    if tau.shape != (ne,):
        raise ValueError("tau length does not match edge count")
    target = tau * r
    pinned = dict(zip(surface.leg_columns, level.boundary_colors))
    ranges = []
    for col in range(ne):
        if col in pinned:
            ranges.append([pinned[col]])
        else:
            mid = int(round(target[col]))
            lo = max(1, mid - window)
            hi = min(r - 1, mid + window)
            if lo > hi:
                raise AnchorError(f"target color for edge {col} out of range")
            ranges.append(list(range(lo, hi + 1)))
    cand = np.array(list(itertools.product(*ranges)), dtype=np.int64)
    ok = fusion._rows_admissible(cand, surface, level)
    cand = cand[ok]
    if len(cand) == 0:
        raise AnchorError("no admissible coloring near tau at this level")
    dist = np.max(np.abs(cand - target[None, :]), axis=1)
    order = np.lexsort(tuple(cand[:, j] for j in range(ne - 1, -1, -1)) + (dist,))
    best = cand[order[0]]
    if dist[order[0]] > 2.0:
        raise AnchorError(
            f"nearest admissible coloring is {dist[order[0]]:.2f} > 2 away per edge")
    return best


# ---------- symbol samples ----------


@dataclass
class PsiSymbol:
    """One sample of a curve symbol: Fourier data at a realized (tau, hbar).

    coeffs maps shift vectors to F_k(c/r, 1/r); the homology bookkeeping
    carries the curve's projected class and the accumulated product sign.
    sigma evaluates the series at angles theta, per character.
    """
    surface: object
    hbar: float
    tau: np.ndarray
    coeffs: dict
    class_coords: tuple
    sign: float = 1.0
    label: str = ""

    def shift_vectors(self):
        return sorted(self.coeffs)

    def sigma(self, theta, character=None) -> complex:
        theta = np.asarray(theta, dtype=np.float64)
        tot = 0.0 + 0.0j
        for k, f in self.coeffs.items():
            tot += f * np.exp(1j * float(np.dot(k, theta)))
        chi = 1.0 if character is None else character.sign(self.class_coords)
        return self.sign * chi * tot

    def max_coefficient(self) -> float:
        return max((abs(v) for v in self.coeffs.values()), default=0.0)


def symbol_sample(spec: cv.MulticurveSpec, level: Level, tau,
                  engine: str = "closed") -> PsiSymbol:
    """Sample the curve's symbol at the admissible anchor nearest tau * r."""
    surf = spec.surface
    anchor = nearest_coloring(surf, level, tau)
    row = fusion.operator_coefficients(spec, level, anchor[None, :], engine=engine)
    coeffs = {k: complex(v[0]) for k, v in row.items() if abs(v[0]) > 0}
    coords = cv.project_class(spec)
    return PsiSymbol(surf, 1.0 / level.r, anchor / level.r, coeffs,
                     coords, 1.0, spec.label)


def symbol_from_operator(op: fusion.CurveOperator, tau) -> PsiSymbol:
    """Read one row of an assembled operator as a symbol sample."""
    surf = op.surface
    anchor = nearest_coloring(surf, op.level, tau)
    idx = int(op.colorings.lookup(anchor[None, :])[0])
    if idx < 0:
        raise AnchorError("anchor not in the operator's coloring set")
    coeffs = {}
    for k, vals in op.coeffs.items():
        v = complex(vals[idx])
        if abs(v) > 0:
            coeffs[k] = v
    kvecs = np.array([k for k in op.coeffs], dtype=np.int64)
    parity = tuple(int(x) for x in (np.abs(kvecs).max(axis=0) % 2)) \
        if len(kvecs) else tuple([0] * len(surf.edge_ids))
    coords = surf.h1.reduce(np.array(parity, dtype=np.uint8))
    return PsiSymbol(surf, 1.0 / op.level.r, anchor / op.level.r, coeffs,
                     coords, 1.0, op.label)


# ---------- extrapolation ----------


@dataclass
class AsymptoticFit:
    """Per-shift-vector polynomial fit of F_k against powers of hbar."""
    surface: object
    tau: np.ndarray
    F0: dict
    F1: dict
    residual: dict
    sigma_F0: dict
    sigma_F1: dict
    order: int
    levels: tuple
    cond: float
    drift: float
    class_coords: tuple = ()
    sign: float = 1.0

    def sigma0(self, theta, character=None) -> complex:
        theta = np.asarray(theta, dtype=np.float64)
        tot = 0.0 + 0.0j
        for k, f in self.F0.items():
            tot += f * np.exp(1j * float(np.dot(k, theta)))
        chi = 1.0 if character is None else character.sign(self.class_coords)
        return self.sign * chi * tot

    def first_order(self, theta, character=None) -> complex:
        theta = np.asarray(theta, dtype=np.float64)
        tot = 0.0 + 0.0j
        for k, f in self.F1.items():
            tot += f * np.exp(1j * float(np.dot(k, theta)))
        chi = 1.0 if character is None else character.sign(self.class_coords)
        return self.sign * chi * tot

    def residual_norm(self) -> float:
        return max(self.residual.values(), default=0.0)

    def sigma_bound(self) -> float:
        """Conservative per-coefficient uncertainty of the F1 extraction."""
        out = 0.0
        for k in self.F1:
            out = max(out, self.sigma_F1.get(k, 0.0))
        return out


def extrapolate(samples, target_tau=None, order=None, dF0=None) -> AsymptoticFit:
    """Fit F_k(tau, hbar) = F0 + hbar F1 (+ nuisance powers) across levels.

    order: polynomial degree; defaults to 2 with >= 4 samples, else 1.
    dF0: optional {k: array of dF/dtau per edge} used to transport samples
    whose realized tau drifted away from target_tau before fitting.
    """
    if len(samples) < 3:
        raise FitError("need at least three levels to extrapolate")
    samples = sorted(samples, key=lambda s: -s.hbar)
    surf = samples[0].surface
    if target_tau is None:
        target_tau = samples[-1].tau
    target_tau = np.asarray(target_tau, dtype=np.float64)
    drift = max(float(np.max(np.abs(s.tau - target_tau))) for s in samples)

    if order is None:
        order = 2 if len(samples) >= 4 else 1
    if order >= len(samples):
        raise FitError("not enough levels for the requested fit order")

    keys = sorted(set().union(*(s.coeffs.keys() for s in samples)))
    hb = np.array([s.hbar for s in samples])
    X = np.vander(hb, order + 1, increasing=True)
    scale = np.linalg.norm(X, axis=0)
    Xs = X / scale
    cond = float(np.linalg.cond(Xs))
    if cond > 1e8:
        raise FitError(f"levels too clustered for a degree-{order} fit "
                       f"(condition {cond:.1e})")
    # per-coefficient standard errors from the normal equations
    cov_unit = np.linalg.inv(Xs.T @ Xs)
    dof = max(1, len(samples) - (order + 1))

    # A truncated series leaves an hbar^(order+1) tail.  The tail leaks
    # into the fitted coefficients by a design-dependent factor of what
    # the residual shows, so the raw lstsq sigma understates the error.
    # Inflate each sigma by that geometry ratio (it cancels the unknown
    # tail amplitude); noise-dominated fits keep the plain estimate.
    vnext = hb ** (order + 1)
    leak = cov_unit @ (Xs.T @ vnext)
    tail_rms = np.linalg.norm(vnext - Xs @ leak) / np.sqrt(dof)
    if tail_rms > 0:
        geo = np.abs(leak) / (tail_rms * np.sqrt(np.diag(cov_unit)))
        geo = np.maximum(geo, 1.0)
    else:
        geo = np.ones(order + 1)

    F0, F1, resid, s0, s1 = {}, {}, {}, {}, {}
    for k in keys:
        y = np.array([s.coeffs.get(k, 0.0) for s in samples], dtype=np.complex128)
        if dF0 is not None and k in dF0:
            for i, s in enumerate(samples):
                y[i] -= complex(np.dot(dF0[k], s.tau - target_tau))
        beta, *_ = np.linalg.lstsq(Xs, y, rcond=None)
        beta = beta / scale
        rr = y - X @ beta
        rms = float(np.sqrt(np.mean(np.abs(rr) ** 2)))
        sig2 = np.sum(np.abs(rr) ** 2) / dof
        F0[k] = complex(beta[0])
        F1[k] = complex(beta[1]) if order >= 1 else 0.0
        resid[k] = rms
        s0[k] = float(np.sqrt(sig2 * cov_unit[0, 0]) * geo[0] / scale[0])
        s1[k] = (float(np.sqrt(sig2 * cov_unit[1, 1]) * geo[1] / scale[1])
                 if order >= 1 else 0.0)

    levels = tuple(int(round(1.0 / s.hbar)) for s in samples)
    return AsymptoticFit(surf, target_tau, F0, F1, resid, s0, s1, order,
                         levels, cond, drift,
                         samples[0].class_coords, samples[0].sign)


# ---------- tau derivatives and the first-order identity ----------


def tau_derivative(spec: cv.MulticurveSpec, levels, tau, col: int,
                   step: float, order=None, engine: str = "closed"):
    """Five-point stencil derivative of F0_k along one edge angle.

    Returns (dF0 {k: complex}, error proxy per k).  The proxy combines the
    three- vs five-point discrepancy with the propagated fit sigmas.
    """
    tau = np.asarray(tau, dtype=np.float64)
    fits = {}
    for j in (-2, -1, 1, 2):
        t = tau.copy()
        t[col] += j * step
        samples = [symbol_sample(spec, lv, t, engine=engine) for lv in levels]
        fits[j] = extrapolate(samples, target_tau=t, order=order)
    keys = sorted(set().union(*(f.F0.keys() for f in fits.values())))
    dF0, err = {}, {}
    for k in keys:
        f = {j: fits[j].F0.get(k, 0.0) for j in (-2, -1, 1, 2)}
        d5 = (-f[2] + 8 * f[1] - 8 * f[-1] + f[-2]) / (12 * step)
        d3 = (f[1] - f[-1]) / (2 * step)
        sig = sum(abs(w) * fits[j].sigma_F0.get(k, 0.0)
                  for j, w in ((-2, 1 / 12), (-1, 8 / 12), (1, 8 / 12), (2, 1 / 12)))
        dF0[k] = complex(d5)
        err[k] = abs(d5 - d3) + sig / step
    return dF0, err


def delta_coefficients(spec: cv.MulticurveSpec, levels, tau, step: float,
                       order=None, engine: str = "closed"):
    """Fourier coefficients of the mixed-derivative first-order term.

    Delta(tau, theta) = (1/2i) sum_e d^2/(dtau_e dtheta_e) sigma0 expands
    to Delta_k = (1/2) sum_e k_e dF0_k/dtau_e; only edges carrying
    nonzero shifts contribute.
    """
    probe = symbol_sample(spec, levels[0], tau, engine=engine)
    kvecs = np.array(sorted(probe.coeffs), dtype=np.int64)
    active = [c for c in range(kvecs.shape[1]) if np.any(kvecs[:, c] != 0)] \
        if len(kvecs) else []
    delta = {tuple(k): 0.0 + 0.0j for k in kvecs}
    err = {tuple(k): 0.0 for k in kvecs}
    for col in active:
        dF0, e = tau_derivative(spec, levels, tau, col, step, order, engine)
        for k in delta:
            delta[k] += 0.5 * k[col] * dF0.get(k, 0.0)
            err[k] += 0.5 * abs(k[col]) * e.get(k, 0.0)
    return delta, err


def default_term(fit: AsymptoticFit, delta: dict) -> dict:
    """Difference between the fitted first order and the predicted one."""
    keys = sorted(set(fit.F1) | set(delta))
    return {k: fit.F1.get(k, 0.0) - delta.get(k, 0.0) for k in keys}


def residual_slope(samples, fit: AsymptoticFit, delta: dict):
    """Log-log slope of sum_k |F_k(hbar) - F0_k - hbar Delta_k| vs hbar.

    When the default vanishes this residual is quadratic in hbar; a
    nonzero default drags the slope toward one.
    """
    hs, res = [], []
    for s in samples:
        tot = 0.0
        for k in sorted(set(s.coeffs) | set(fit.F0)):
            tot += abs(s.coeffs.get(k, 0.0) - fit.F0.get(k, 0.0)
                       - s.hbar * delta.get(k, 0.0))
        if tot > 0:
            hs.append(s.hbar)
            res.append(tot)
    if len(hs) < 2:
        return float("nan"), np.array(hs), np.array(res)
    slope = np.polyfit(np.log(hs), np.log(res), 1)[0]
    return float(slope), np.array(hs), np.array(res)


def first_order_report(spec: cv.MulticurveSpec, levels, tau, step: float,
                       order=None, engine: str = "closed") -> dict:
    """Full first-order analysis of one curve at one tau anchor.

    Returns the fit, the predicted first order, the default and its
    tolerance (five times the combined fit and stencil uncertainty), and
    the convergence data of the corrected residual.
    """
    samples = [symbol_sample(spec, lv, tau, engine=engine) for lv in levels]
    fit = extrapolate(samples, target_tau=np.asarray(tau, dtype=np.float64),
                      order=order)
    delta, derr = delta_coefficients(spec, levels, tau, step, order, engine)
    dflt = default_term(fit, delta)
    slope, hs, res = residual_slope(samples, fit, delta)
    tol = {}
    for k in dflt:
        tol[k] = 5.0 * (fit.sigma_F1.get(k, 0.0) + derr.get(k, 0.0))
    return {
        "fit": fit,
        "samples": samples,
        "delta": delta,
        "default": dflt,
        "default_tol": tol,
        "default_ok": all(abs(dflt[k]) <= max(tol[k], 1e-12) for k in dflt),
        "slope": slope,
        "residual_h": hs,
        "residual": res,
    }


# ---------- composites ----------


def composite_row(spec_a: cv.MulticurveSpec, spec_b: cv.MulticurveSpec,
                  level: Level, tau, engine: str = "closed") -> PsiSymbol:
    """Symbol sample of the operator product a.b, computed row-wise.

    The product coefficient at shift k is sum over splittings k1 + k2 = k
    of F_a[k1](c + k2) F_b[k2](c); the homology data multiplies with the
    intersection sign of the two curves.
    """
    surf = spec_a.surface
    if surf.cache_key != spec_b.surface.cache_key:
        raise ValueError("curves live on different graphs")
    anchor = nearest_coloring(surf, level, tau)
    row_b = fusion.operator_coefficients(spec_b, level, anchor[None, :],
                                         engine=engine)
    out = {}
    for k2, v2 in row_b.items():
        f2 = complex(v2[0])
        if abs(f2) == 0:
            continue
        mid = anchor + np.asarray(k2, dtype=np.int64)
        if not fusion._rows_admissible(mid[None, :], surf, level)[0]:
            continue
        row_a = fusion.operator_coefficients(spec_a, level, mid[None, :],
                                             engine=engine)
        for k1, v1 in row_a.items():
            f1 = complex(v1[0])
            if abs(f1) == 0:
                continue
            key = tuple(int(x + y) for x, y in zip(k1, k2))
            out[key] = out.get(key, 0.0) + f1 * f2
    out = {k: v for k, v in out.items() if abs(v) > 0}
    ia = cv.intersection_sign(spec_a, spec_b)
    pa = np.asarray(cv.project_class(spec_a), dtype=np.uint8)
    pb = np.asarray(cv.project_class(spec_b), dtype=np.uint8)
    coords = tuple(int(x) for x in (pa ^ pb))
    return PsiSymbol(surf, 1.0 / level.r, anchor / level.r, out, coords,
                     float(ia), f"{spec_a.label}.{spec_b.label}")
