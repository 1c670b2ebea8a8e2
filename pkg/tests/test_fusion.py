"""Fusion coefficients, graphical nets, both engines, operator assembly.

Frozen expected values were computed from the closed trigonometric
expressions directly, independent of the module's table-based routes.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curveops import curves as cv
from curveops import fusion, qnum
from curveops.fusion import CapabilityError
from curveops.qnum import Level, sin_tables
from curveops.surface import get_surface


# ---------- elementary coefficients ----------


def test_coeff_F_frozen():
    assert fusion.coeff_F(1, 1, 3, 4, 5, 20) == pytest.approx(
        1.0353176084827853, rel=1e-14)
    assert fusion.coeff_F(1, -1, 3, 4, 5, 20) == pytest.approx(
        -0.20992416392644792, rel=1e-14)
    assert fusion.coeff_F(-1, 1, 3, 4, 5, 20) == pytest.approx(
        -0.20992416392644792, rel=1e-14)
    assert fusion.coeff_F(-1, -1, 3, 4, 5, 20) == pytest.approx(
        -0.8367404113429264, rel=1e-14)


def test_coeff_F_swap_symmetry():
    # the mixed-sign coefficients exchange their fused colors
    for a, b, c in [(2, 5, 6), (4, 4, 7), (1, 8, 8)]:
        assert fusion.coeff_F(-1, 1, a, b, c, 24) == pytest.approx(
            fusion.coeff_F(1, -1, a, c, b, 24), rel=1e-14)


def test_coeff_F_strict_raises():
    # (a-b+c-1)/2 = -1/2 puts the radicand below zero
    with pytest.raises(ValueError, match="radicand"):
        fusion.coeff_F(1, -1, 1, 2, 1, 12)
    assert fusion.coeff_F(1, -1, 1, 2, 1, 12, strict=False) == 0.0


def test_coeff_F_bad_signs():
    with pytest.raises(ValueError):
        fusion.coeff_F(0, 1, 2, 3, 4, 10)


@settings(max_examples=60)
@given(st.integers(2, 10), st.integers(2, 10), st.integers(2, 10))
def test_coeff_F_pair_product_symmetry(a, b, c):
    # F_{++} at (b,c) and F_{--} at the shifted colors share their radicand
    r = 24
    up = fusion.coeff_F(1, 1, a, b, c, r, strict=False)
    dn = fusion.coeff_F(-1, -1, a, b + 1, c + 1, r, strict=False)
    assert abs(up) * 1.0 == pytest.approx(
        abs(dn) * math.sqrt(qnum.qsin(b + 1, r) * qnum.qsin(c + 1, r)
                            / (qnum.qsin(b, r) * qnum.qsin(c, r))), abs=1e-12)


def test_coeff_annulus_frozen():
    assert fusion.coeff_annulus("G", 1, 5, 14) == pytest.approx(
        0.648575761466911 - 0.8132882808488928j, abs=1e-14)
    assert fusion.coeff_annulus("H", 1, 5, 14) == pytest.approx(
        0.648575761466911 + 0.8132882808488928j, abs=1e-14)
    assert fusion.coeff_annulus("L", 1, 5, 14) == pytest.approx(
        1.0402347552973468j, abs=1e-14)
    assert fusion.coeff_annulus("G", -1, 5, 14) == pytest.approx(
        0.2072872352161204 + 0.908184717087649j, abs=1e-14)


def test_coeff_annulus_conjugate_pair():
    for n in (3, 4, 9):
        g = fusion.coeff_annulus("G", 1, n, 14)
        h = fusion.coeff_annulus("H", 1, n, 14)
        assert g == pytest.approx(np.conj(h), abs=1e-14)


def test_coeff_annulus_range_error():
    with pytest.raises(ValueError):
        fusion.coeff_annulus("G", 1, 13, 14)
    with pytest.raises(ValueError):
        fusion.coeff_annulus("Q", 1, 5, 14)


def test_pants_reduce_single_arc():
    # one arc between boundaries b and c is a single trigon removal
    val = fusion.pants_reduce((1, 0, 0), (3.0, 4.0, 5.0), ((), (1,), (1,)), 20)
    assert val == pytest.approx(fusion.coeff_F(1, 1, 3, 4, 5, 20), rel=1e-14)


def test_pants_reduce_shift_mismatch():
    with pytest.raises(ValueError, match="shift"):
        fusion.pants_reduce((1, 0, 0), (3, 4, 5), ((1,), (1,), (1,)), 20)


def test_pants_reduce_out_of_range_is_zero():
    # pushing c past r-1 kills the chain
    val = fusion.pants_reduce((1, 0, 0), (2.0, 4.0, 19.0), ((), (1,), (1,)), 20)
    assert val == 0.0


def test_candlestick_frozen():
    assert fusion.candlestick_glue(7, (1, 1, -1), (1, 1, -1), 16) == \
        pytest.approx(1.009748066701946, rel=1e-14)


def test_candlestick_mismatch_and_walls():
    assert fusion.candlestick_glue(7, (1, -1), (1, 1), 16) == 0.0
    assert fusion.candlestick_glue(15, (1,), (1,), 16) == 0.0   # hits the wall
    with pytest.raises(CapabilityError):
        fusion.candlestick_glue(7, (1, -1), (-1, 1), 16)
    with pytest.raises(ValueError):
        fusion.candlestick_glue(7, (1, 2), (1, 2), 16)


def test_twist_phase():
    assert fusion.twist_phase(1, 6.0, 3, 14) == pytest.approx(
        -0.33027906195516726 - 0.9438833303083675j, abs=1e-14)
    assert fusion.twist_phase(2, 5.0, 0, 14) == pytest.approx(1.0)
    ph = fusion.twist_phase(np.array([1, -1]), np.array([4.0, 5.0]), 2, 30)
    assert np.allclose(np.abs(ph), 1.0)


# ---------- graphical nets ----------


def test_delta_loop_frozen():
    st_ = sin_tables(12)
    assert fusion.delta_loop(3, st_) == pytest.approx(
        -3.3460652149512318, rel=1e-13)
    assert fusion.delta_loop(0, st_) == pytest.approx(1.0)


def test_theta_net_frozen_and_degenerate():
    st_ = sin_tables(12)
    assert fusion.theta_net(2, 3, 3, st_) == pytest.approx(
        2.3660254037844393, rel=1e-12)
    assert fusion.theta_net(1, 1, 1, st_) == 0.0    # odd strand sum
    for x in (2, 4, 5):
        assert fusion.theta_net(0, x, x, st_) == pytest.approx(
            fusion.delta_loop(x, st_), rel=1e-12)


def test_tet_net_frozen():
    st_ = sin_tables(12)
    got = fusion.tet_net([(2, 2, 2)] * 4, st_)
    assert got == pytest.approx(0.9282032302755092, rel=1e-12)


def test_tet_net_degenerates_to_theta():
    # one zero edge collapses the tetrahedron onto a theta
    st_ = sin_tables(14)
    x, y = 3, 4
    got = fusion.tet_net([(0, x, x), (0, y, y), (x, y, 5), (x, y, 5)], st_)
    want = fusion.theta_net(x, y, 5, st_)
    assert got == pytest.approx(want, rel=1e-11)


def test_tet_net_inadmissible_is_zero():
    st_ = sin_tables(12)
    assert fusion.tet_net([(1, 1, 1)] + [(2, 2, 2)] * 3, st_) == 0.0


def test_tet_net_triad_permutation_invariant():
    st_ = sin_tables(13)
    triads = [(2, 3, 3), (2, 4, 4), (3, 4, 5), (3, 4, 5)]
    base = fusion.tet_net(triads, st_)
    assert base != 0.0
    assert fusion.tet_net(triads[::-1], st_) == pytest.approx(base, rel=1e-11)
    shuffled = [triads[2], triads[0], triads[3], triads[1]]
    assert fusion.tet_net(shuffled, st_) == pytest.approx(base, rel=1e-11)


# ---------- closed forms in color space ----------


def test_loop_w_colors_matches_angles():
    # interior rows only; at the walls the angle form rounds, the color
    # form is exact, and the difference is the point of the color form
    r = 14
    cf = 7
    for eps, lo, hi in ((+1, 4, 9), (-1, 5, 10)):
        ce = np.arange(lo, hi + 1)
        want = fusion.loop_w(np.pi * ce / r, np.pi * cf / r, eps * np.pi / r)
        got = fusion._loop_w_colors(ce, np.full_like(ce, cf), eps, r)
        assert np.allclose(got, want, atol=1e-14)
    assert fusion._loop_w_colors(np.array([6]), np.array([7]), 1, 14)[0] == \
        pytest.approx(0.7071067811865476, rel=1e-14)


def test_loop_w_colors_exact_wall_zeros():
    # shifted target breaking the triangle or the sum wall gives a true zero
    r = 14
    # sum wall: 2*ce + cf + eps = 2r
    assert fusion._loop_w_colors(np.array([10]), np.array([7]), 1, r)[0] == 0.0
    # triangle wall: cf = 2*ce + eps ... 2*4 - 1 = 7
    assert fusion._loop_w_colors(np.array([4]), np.array([7]), -1, r)[0] == 0.0
    # out of color range
    assert fusion._loop_w_colors(np.array([13]), np.array([7]), 1, r)[0] == 0.0


def test_loop_w_colors_hermitian():
    r = 22
    ce = np.arange(5, 16)
    cf = np.full_like(ce, 11)
    up = fusion._loop_w_colors(ce, cf, +1, r)
    dn = fusion._loop_w_colors(ce + 1, cf, -1, r)
    assert np.allclose(up, dn, atol=1e-14)


def test_joining_closed_forms_frozen():
    r = 16
    ang = np.pi / r
    I = fusion._joining_diag_colors(np.array([4]), np.array([3 * ang]),
                                    np.array([4 * ang]), np.array([5 * ang]),
                                    np.array([4 * ang]), r)
    J = fusion._joining_offdiag_colors(np.array([4]), np.array([3]),
                                       np.array([4]), np.array([5]),
                                       np.array([4]), r)
    assert I[0] == pytest.approx(1.0821170160036293, rel=1e-13)
    assert J[0] == pytest.approx(0.329135252444439, rel=1e-13)


def test_joining_offdiag_matches_angle_form():
    r = 20
    ce = np.array([4, 6, 8])
    cx1, cy1, cx2, cy2 = (np.array([3, 5, 7]), np.array([4, 4, 4]),
                          np.array([5, 5, 5]), np.array([4, 6, 6]))
    ang = np.pi / r
    want = fusion.joining_offdiag(cx1 * ang, cy1 * ang, cx2 * ang, cy2 * ang,
                                  ce * ang, ang)
    got = fusion._joining_offdiag_colors(ce, cx1, cy1, cx2, cy2, r)
    assert np.allclose(got, want, atol=1e-13)


def test_joining_offdiag_exact_zero_at_wall():
    # cx1 + cy1 = ce + 1 makes the first factor vanish identically
    r = 20
    got = fusion._joining_offdiag_colors(np.array([6]), np.array([3]),
                                         np.array([4]), np.array([5]),
                                         np.array([4]), r)
    assert got[0] == 0.0


def test_joining_diag_finite_at_walls():
    r = 16
    ang = np.pi / r
    flank = [np.array([3 * ang]), np.array([3 * ang]),
             np.array([5 * ang]), np.array([5 * ang])]
    lo = fusion._joining_diag_colors(np.array([1]), *flank, r)
    assert np.isfinite(lo[0])
    flank_hi = [np.array([8 * ang]), np.array([7 * ang]),
                np.array([9 * ang]), np.array([6 * ang])]
    hi = fusion._joining_diag_colors(np.array([15]), *flank_hi, r)
    assert np.isfinite(hi[0])


# ---------- the recoupling engine ----------


def test_dual_channel_block_frozen():
    ns, diag, off = fusion.dual_channel_block(3, 4, 5, 4, 16)
    assert list(ns) == [2, 4, 6]
    j = 1
    assert diag[j] == pytest.approx(-1.0821170160036293, rel=1e-12)
    assert off[j] == pytest.approx(-0.329135252444439, rel=1e-12)
    # the gauge fixes every upward entry nonpositive
    assert np.all(off <= 0)


def test_dual_channel_block_empty_channel():
    ns, diag, off = fusion.dual_channel_block(1, 1, 15, 15, 16)
    assert len(diag) == len(ns)
    if len(ns) == 0:
        assert len(off) == 0


def test_engines_agree_on_full_grid_loop():
    surf = get_surface("punctured-torus")
    lv = Level.for_surface(14, surf)
    spec = cv.curve_dual(surf, "e")
    rows = qnum.coloring_set(surf, lv).array
    slow = fusion.operator_coefficients(spec, lv, rows, engine="recoupling")
    fast = fusion.operator_coefficients(spec, lv, rows, engine="closed")
    assert set(slow) == set(fast)
    for k in slow:
        assert np.allclose(slow[k], fast[k], atol=1e-13)


def test_engines_agree_on_full_grid_joining():
    surf = get_surface("genus2")
    lv = Level(9)
    spec = cv.curve_dual(surf, "f")
    rows = qnum.coloring_set(surf, lv).array
    slow = fusion.operator_coefficients(spec, lv, rows, engine="recoupling")
    fast = fusion.operator_coefficients(spec, lv, rows, engine="closed")
    for k in set(slow) | set(fast):
        a = slow.get(k, np.zeros(len(rows)))
        b = fast.get(k, np.zeros(len(rows)))
        assert np.allclose(a, b, atol=1e-12)


def test_extended_precision_at_large_level():
    # the alternating recoupling sums lose ~7 digits by r = 200; the
    # extended-precision tables must hold the routes together to ~1e-12
    surf = get_surface("genus2")
    lv = Level(200)
    spec = cv.curve_dual(surf, "e")
    rows = np.array([[99, 100, 100], [51, 100, 150], [120, 61, 60],
                     [99, 2, 100], [3, 100, 100]], dtype=np.int64)
    assert fusion._rows_admissible(rows, surf, lv).all()
    slow = fusion.operator_coefficients(spec, lv, rows, engine="recoupling")
    fast = fusion.operator_coefficients(spec, lv, rows, engine="closed")
    for k in set(slow) | set(fast):
        a = slow.get(k, np.zeros(len(rows)))
        b = fast.get(k, np.zeros(len(rows)))
        den = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        assert np.max(np.abs(a - b) / den) < 5e-12


# ---------- operator assembly ----------


def test_core_operator_diagonal(genus2):
    lv = Level(11)
    op = fusion.assemble_operator(cv.curve_core(genus2, "f", count=2), lv)
    assert op.shift_vectors() == [(0, 0, 0)]
    cols = op.colorings.array
    want = (-2.0 * np.cos(np.pi * cols[:, 1] / 11.0)) ** 2
    assert np.allclose(op.diagonal().real, want, rtol=1e-13)
    assert np.allclose(op.diagonal().imag, 0.0)


def test_dual_operator_support(ptorus, genus2):
    lv = Level.for_surface(14, ptorus)
    op = fusion.assemble_operator(cv.curve_dual(ptorus, "e"), lv)
    assert op.shift_vectors() == [(-1, 0), (1, 0)]

    op2 = fusion.assemble_operator(cv.curve_dual(genus2, "g"), Level(12))
    assert op2.shift_vectors() == [(0, 0, -2), (0, 0, 0), (0, 0, 2)]


def test_operator_hermitian(ptorus, genus2):
    for surf, eid, r in ((ptorus, "e", 18), (genus2, "e", 12)):
        lv = Level.for_surface(r, surf)
        op = fusion.assemble_operator(cv.curve_dual(surf, eid), lv)
        assert op.hermiticity_defect() <= 1e-13


def test_twisted_operator_phases(ptorus):
    lv = Level.for_surface(14, ptorus)
    base = fusion.assemble_operator(cv.curve_dual(ptorus, "e"), lv)
    tw = fusion.assemble_operator(
        cv.apply_dehn_twist(cv.curve_dual(ptorus, "e"), "e", 2), lv)
    cols = base.colorings.array
    for k in base.shift_vectors():
        ph = fusion.twist_phase(k[0], cols[:, 0].astype(float), 2, 14)
        assert np.allclose(tw.coeffs[k], base.coeffs[k] * ph, atol=1e-13)
    assert tw.hermiticity_defect() <= 1e-13


def test_compose_matches_matrix_product(genus2):
    lv = Level(10)
    a = fusion.assemble_operator(cv.curve_core(genus2, "e"), lv)
    b = fusion.assemble_operator(cv.curve_dual(genus2, "e"), lv)
    ab = fusion.compose(a, b)
    direct = (a.matrix() @ b.matrix() - ab.matrix()).tocoo()
    assert direct.nnz == 0 or np.abs(direct.data).max() < 1e-13


def test_union_operator_is_product_of_factors(genus2):
    lv = Level(10)
    u = fusion.assemble_operator(
        cv.union(cv.curve_core(genus2, "e"), cv.curve_dual(genus2, "f")), lv)
    a = fusion.assemble_operator(cv.curve_core(genus2, "e"), lv)
    b = fusion.assemble_operator(cv.curve_dual(genus2, "f"), lv)
    d = (u.matrix() - a.matrix() @ b.matrix()).tocoo()
    assert d.nnz == 0 or np.abs(d.data).max() < 1e-13


def test_opnorm_and_coefficient_bounds(ptorus):
    lv = Level.for_surface(26, ptorus)
    op = fusion.assemble_operator(cv.curve_dual(ptorus, "e"), lv)
    assert op.max_abs_coefficient() <= 2.0 + 1e-12
    assert op.opnorm() <= 2.0 + 1e-9


def test_unimplemented_pattern_raises(genus2):
    spec = cv.MulticurveSpec(genus2, {}, {"e": cv.AnnulusData(3, 0, 0)})
    with pytest.raises(CapabilityError):
        fusion.operator_coefficients(spec, Level(8), np.array([[1, 1, 1]]))


def test_inadmissible_rows_rejected_by_lookup(genus2):
    lv = Level(8)
    cs = qnum.coloring_set(genus2, lv)
    bad = np.array([[2, 2, 2]])     # even triple sum
    assert cs.lookup(bad)[0] == -1
