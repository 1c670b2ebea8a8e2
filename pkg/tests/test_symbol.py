"""Anchoring, level extrapolation, the first-order identity, composites."""
import math

import numpy as np
import pytest

from curveops import curves as cv
from curveops import fusion
from curveops import symbol as sy
from curveops.qnum import Level
from curveops.surface import characters, get_surface
from curveops.symbol import (AnchorError, AsymptoticFit, FitError, PsiSymbol,
                             extrapolate, nearest_coloring, symbol_sample)

LEVELS_PT = [Level(r, ("1/2",)) for r in (150, 450, 750, 1050, 1350)]
TAU_PT = np.array([0.52, 0.5])


def _w0(tau_e, alpha):
    """hbar -> 0 limit of the loop shift coefficient."""
    return math.sqrt(max(math.sin(tau_e + alpha / 2) * math.sin(tau_e - alpha / 2), 0.0)) / math.sin(tau_e)


def test_nearest_coloring_exact_anchor(ptorus):
    lv = Level(150, ("1/2",))
    got = nearest_coloring(ptorus, lv, TAU_PT * np.pi / np.pi)
    assert list(got) == [78, 75]


def test_nearest_coloring_requires_matching_length(ptorus):
    with pytest.raises(ValueError):
        nearest_coloring(ptorus, Level(150, ("1/2",)), np.array([0.5]))


def test_nearest_coloring_too_far(ptorus):
    # leg pinned at 75 forces tau_l near 0.5; an anchor at 0.25 cannot exist
    with pytest.raises(AnchorError):
        nearest_coloring(ptorus, Level(150, ("1/2",)), np.array([0.52, 0.25]))


def test_symbol_sample_matches_loop_form(ptorus):
    lv = Level(150, ("1/2",))
    smp = symbol_sample(cv.curve_dual(ptorus, "e"), lv, TAU_PT)
    anchor = nearest_coloring(ptorus, lv, TAU_PT)
    r = lv.r
    for k, eps in (((1, 0), 1), ((-1, 0), -1)):
        want = fusion.loop_w(np.pi * anchor[0] / r, np.pi * anchor[1] / r,
                             eps * np.pi / r)
        assert smp.coeffs[k] == pytest.approx(want, rel=1e-13)
    assert smp.hbar == pytest.approx(1 / 150)
    assert smp.class_coords == (1,)


def test_sigma_evaluation_with_character(ptorus):
    smp = symbol_sample(cv.curve_dual(ptorus, "e"), Level(150, ("1/2",)),
                        TAU_PT)
    chi0, chi1 = characters(ptorus)
    th = np.array([0.7, 0.0])
    plain = smp.sigma(th)
    flipped = smp.sigma(th, chi1 if chi1.sign((1,)) == -1 else chi0)
    assert flipped == pytest.approx(-plain)


def _synthetic(coefs, levels, ne=2):
    """Samples whose k=(1,0) coefficient is a polynomial in hbar."""
    out = []
    for r in levels:
        h = 1.0 / r
        val = sum(c * h ** j for j, c in enumerate(coefs))
        out.append(PsiSymbol(None, h, np.array([0.5] * ne), {(1, 0): val},
                             (0,), 1.0, "synthetic"))
    return out


def test_extrapolate_recovers_polynomial():
    fit = extrapolate(_synthetic([2.0, 3.0, 0.5], (100, 200, 300, 400, 500)),
                      order=2)
    assert fit.F0[(1, 0)] == pytest.approx(2.0, abs=1e-11)
    assert fit.F1[(1, 0)] == pytest.approx(3.0, abs=1e-8)
    assert fit.residual[(1, 0)] < 1e-12


def test_extrapolate_errors():
    with pytest.raises(FitError, match="three"):
        extrapolate(_synthetic([1.0], (100, 200)))
    with pytest.raises(FitError, match="order"):
        extrapolate(_synthetic([1.0], (100, 200, 300)), order=3)
    with pytest.raises(FitError, match="clustered"):
        extrapolate(_synthetic([1.0], (1000, 1000001, 1000002, 1000003)),
                    order=3)


def test_extrapolate_sigma_covers_tail_leakage():
    # a pure hbar^(order+1) tail leaks into the coefficients; the reported
    # sigma must absorb the leak exactly, not just the fit residual
    levels = (150, 450, 750, 1050, 1350)
    samples = _synthetic([0.0, 0.0, 7.0], levels)  # pure quadratic, order 1
    fit = extrapolate(samples, order=1)
    bias0 = abs(fit.F0[(1, 0)])
    bias1 = abs(fit.F1[(1, 0)])
    assert bias1 > 0
    assert bias0 <= fit.sigma_F0[(1, 0)] * (1 + 1e-9)
    assert bias1 <= fit.sigma_F1[(1, 0)] * (1 + 1e-9)
    # and the inflation is calibrated, not a blanket safety factor
    assert bias1 >= 0.5 * fit.sigma_F1[(1, 0)]


def test_extrapolate_transports_drifted_tau():
    # samples taken at drifting tau are moved to the target with dF0
    levels = (100, 200, 300, 400)
    slope = 4.0
    out = []
    for i, r in enumerate(levels):
        h = 1.0 / r
        tau = np.array([0.5 + 0.001 * i, 0.5])
        val = 2.0 + slope * (tau[0] - 0.5)
        out.append(PsiSymbol(None, h, tau, {(1, 0): val}, (0,), 1.0, ""))
    fit = extrapolate(out, target_tau=np.array([0.5, 0.5]), order=1,
                      dF0={(1, 0): np.array([slope, 0.0])})
    assert fit.F0[(1, 0)] == pytest.approx(2.0, abs=1e-10)
    assert fit.drift == pytest.approx(0.003)


def test_fit_against_loop_limit(ptorus):
    spec = cv.curve_dual(ptorus, "e")
    samples = [symbol_sample(spec, lv, TAU_PT) for lv in LEVELS_PT]
    fit = extrapolate(samples, target_tau=TAU_PT, order=3)
    want = _w0(np.pi * 0.52, np.pi * 0.5)
    for k in ((1, 0), (-1, 0)):
        assert fit.F0[k] == pytest.approx(want, abs=1e-9)


def test_tau_derivative_matches_numeric(ptorus):
    spec = cv.curve_dual(ptorus, "e")
    dF0, err = sy.tau_derivative(spec, LEVELS_PT, TAU_PT, col=0,
                                 step=2 / 150, order=3)
    s = 1e-6
    want = (_w0(np.pi * (0.52 + s), np.pi * 0.5)
            - _w0(np.pi * (0.52 - s), np.pi * 0.5)) / (2 * s)
    for k in ((1, 0), (-1, 0)):
        assert dF0[k].real == pytest.approx(want, abs=5e-6)
        assert abs(dF0[k].imag) < 1e-12
        assert err[k] < 1e-3


def test_first_order_report_loop(ptorus):
    rep = sy.first_order_report(cv.curve_dual(ptorus, "e"), LEVELS_PT,
                                TAU_PT, step=2 / 150, order=3)
    assert rep["default_ok"]
    assert rep["slope"] == pytest.approx(2.0, abs=0.1)
    for k, tol in rep["default_tol"].items():
        assert abs(rep["default"][k]) <= max(tol, 1e-12)


def test_composite_row_core_squared(genus2):
    lv = Level(150)
    tau = np.array([0.42, 0.38, 0.34])
    comp = sy.composite_row(cv.curve_core(genus2, "e"),
                            cv.curve_core(genus2, "e"), lv, tau)
    anchor = nearest_coloring(genus2, lv, tau)
    want = (-2.0 * math.cos(math.pi * anchor[0] / 150)) ** 2
    assert comp.coeffs[(0, 0, 0)] == pytest.approx(want, rel=1e-13)


def test_composite_row_mixed(ptorus):
    lv = Level(150, ("1/2",))
    a = cv.curve_core(ptorus, "e")
    b = cv.curve_dual(ptorus, "e")
    comp = sy.composite_row(a, b, lv, TAU_PT)
    anchor = nearest_coloring(ptorus, lv, TAU_PT)
    r = lv.r
    # diagonal factor evaluated at the shifted color times the shift term
    for k, eps in (((1, 0), 1), ((-1, 0), -1)):
        want = (-2.0 * math.cos(math.pi * (anchor[0] + eps) / r)) \
            * fusion.loop_w(math.pi * anchor[0] / r, math.pi * anchor[1] / r,
                            eps * math.pi / r)
        assert comp.coeffs[k] == pytest.approx(want, rel=1e-12)
    assert comp.sign == cv.intersection_sign(a, b)
    assert comp.label == "C[e].D[e]"


def test_symbol_from_operator_agrees(ptorus):
    lv = Level.for_surface(150, ptorus)
    spec = cv.curve_dual(ptorus, "e")
    op = fusion.assemble_operator(spec, lv)
    via_op = sy.symbol_from_operator(op, TAU_PT)
    direct = symbol_sample(spec, lv, TAU_PT)
    assert set(via_op.coeffs) == set(direct.coeffs)
    for k in direct.coeffs:
        assert via_op.coeffs[k] == pytest.approx(direct.coeffs[k], rel=1e-13)
    assert via_op.class_coords == direct.class_coords


def test_fit_sigma0_and_bound(ptorus):
    spec = cv.curve_dual(ptorus, "e")
    samples = [symbol_sample(spec, lv, TAU_PT) for lv in LEVELS_PT]
    fit = extrapolate(samples, target_tau=TAU_PT, order=3)
    th = np.array([1.2, 0.0])
    want = sum(fit.F0[k] * np.exp(1j * np.dot(k, th)) for k in fit.F0)
    assert fit.sigma0(th) == pytest.approx(want)
    assert fit.sigma_bound() >= 0.0
    chi = [c for c in characters(ptorus) if c.sign((1,)) == -1][0]
    assert fit.sigma0(th, chi) == pytest.approx(-want)
