"""Brackets, admissibility, coloring enumeration, and the norm form."""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curveops import qnum
from curveops.qnum import (Level, admissible_triple, enumerate_colorings,
                           is_admissible, qint, qsin, sin_tables,
                           vertex_weight)


def test_qsin_matches_sine():
    for n, r in [(1, 7), (3.5, 20), (12, 13), (5, 200)]:
        assert qsin(n, r) == pytest.approx(math.sin(math.pi * n / r), abs=1e-15)


def test_qsin_wall_zeros_are_exact():
    # integer multiples of r must give true zeros, not sin(rounded angle)
    for r in (7, 14, 150, 1350):
        for n in (0, r, 2 * r, -r, 3 * r):
            assert qsin(n, r) == 0.0
    arr = qsin(np.array([0, 5, 14, 28, -14]), 14)
    assert arr[0] == 0.0 and arr[2] == 0.0 and arr[3] == 0.0 and arr[4] == 0.0
    assert arr[1] != 0.0


def test_qsin_sign_pattern():
    r = 10
    assert qsin(3, r) > 0
    assert qsin(13, r) < 0       # second period, negative lobe
    assert qsin(23, r) > 0
    assert qsin(-3, r) == pytest.approx(-qsin(3, r))


def test_qint():
    assert qint(1, 9) == pytest.approx(1.0)
    assert qint(2, 9) == pytest.approx(2 * math.cos(math.pi / 9))


def test_sin_tables_heads_and_walls():
    st_ = sin_tables(12)
    assert st_.logf[0] == 0.0
    assert st_.signf[0] == 1.0
    assert st_.sign[12] == 0.0 and st_.sign[24] == 0.0
    assert st_.log[12] == -np.inf
    # the factorial tables must never contain NaN
    assert not np.isnan(st_.logf).any()
    assert not np.isnan(st_.signf).any()


def test_sin_tables_factorial_values():
    st_ = sin_tables(11)
    want = 1.0
    for m in range(1, 6):
        want *= math.sin(math.pi * m / 11)
    assert st_.signf[5] * math.exp(st_.logf[5]) == pytest.approx(want, rel=1e-13)


def test_sin_tables_negative_fact():
    st_ = sin_tables(9)
    lg, sg = st_.fact(np.array([-1, 0, 2]))
    assert lg[0] == -np.inf and sg[0] == 0.0
    assert lg[1] == 0.0 and sg[1] == 1.0


def test_sin_tables_longdouble():
    st_ = sin_tables(200, np.longdouble)
    assert st_.log.dtype == np.longdouble
    assert st_.logf.dtype == np.longdouble
    assert st_.signf[0] == 1.0
    # extended pi agrees with float pi to double rounding
    assert float(qnum.pi_for(np.longdouble)) == pytest.approx(np.pi, abs=1e-16)


def _triple_ok(a, b, c, r):
    # independent statement of the vertex condition
    if not all(1 <= x <= r - 1 for x in (a, b, c)):
        return False
    if (a + b + c) % 2 != 1 or a + b + c >= 2 * r:
        return False
    return a < b + c and b < a + c and c < a + b


@given(st.integers(1, 12), st.integers(1, 12), st.integers(1, 12),
       st.integers(4, 13))
def test_admissible_triple_against_brute_force(a, b, c, r):
    assert admissible_triple(a, b, c, r) == _triple_ok(a, b, c, r)


def test_vertex_weight_symmetric_and_positive():
    r = 16
    for a, b, c in [(3, 4, 6), (1, 7, 7), (5, 5, 5)]:
        w = vertex_weight(a, b, c, r)
        assert w > 0
        for p in itertools.permutations((a, b, c)):
            assert vertex_weight(*p, r) == pytest.approx(w, rel=1e-12)


def test_vertex_weight_rejects_inadmissible():
    with pytest.raises(qnum.AdmissibilityError):
        vertex_weight(1, 1, 5, 12)


def test_level_boundary_colors():
    lv = Level(12, ("1/2", "1/3"))
    assert lv.boundary_colors == (6, 4)
    assert lv.denominator == 6


def test_level_rejects_bad_input():
    with pytest.raises(ValueError):
        Level(2)
    with pytest.raises(ValueError):
        Level(10, ("1/4",))     # 10 not divisible by 4
    with pytest.raises(ValueError):
        Level(12, ("3/2",))


def _brute_colorings(surf, lv):
    ne = len(surf.edges)
    pinned = dict(zip(surf.leg_columns, lv.boundary_colors))
    axes = [[pinned[c]] if c in pinned else range(1, lv.r)
            for c in range(ne)]
    out = [row for row in itertools.product(*axes)
           if is_admissible(np.array(row), surf, lv)]
    return np.array(out, dtype=np.int64).reshape(len(out), ne)


@pytest.mark.parametrize("name,rs", [
    ("punctured-torus", (6, 10)),
    ("four-holed-sphere", (4, 6, 8)),
    ("genus2", (4, 5, 6, 7, 8)),
])
def test_enumeration_matches_brute_force(name, rs):
    from curveops.surface import get_surface
    surf = get_surface(name)
    for r in rs:
        lv = Level.for_surface(r, surf)
        got = enumerate_colorings(surf, lv)
        want = _brute_colorings(surf, lv)
        assert got.shape == want.shape
        assert np.array_equal(np.sort(got.view([("", got.dtype)] * got.shape[1]),
                                      axis=0).view(got.dtype),
                              np.sort(want.view([("", want.dtype)] * want.shape[1]),
                                      axis=0).view(want.dtype))


def test_coloring_set_lookup(genus2):
    lv = Level(8)
    cs = qnum.coloring_set(genus2, lv)
    arr = cs.array
    assert len(cs) == len(arr) > 0
    idx = cs.lookup(arr[::-1])
    assert np.array_equal(arr[idx], arr[::-1])
    # a row that breaks admissibility is reported as absent
    bad = arr[:1].copy()
    bad[0, 0] = 7 - bad[0, 0]
    if cs.lookup(bad)[0] >= 0:
        assert is_admissible(bad[0], genus2, lv)


def test_norm_sq_positive_and_global_factor(genus2):
    lv = Level(10)
    cols = enumerate_colorings(genus2, lv)[:5]
    g = qnum.norm_sq(cols, genus2, lv, "global")
    l = qnum.norm_sq(cols, genus2, lv, "local")
    assert np.all(np.asarray(g) > 0)
    factor = (2.0 / lv.r) ** (genus2.euler_count / 2.0)
    assert np.allclose(np.asarray(g), np.asarray(l) * factor, rtol=1e-12)


@settings(max_examples=40)
@given(st.integers(5, 16))
def test_enumerated_rows_all_admissible(r):
    from curveops.surface import get_surface
    surf = get_surface("genus2")
    lv = Level(r)
    cols = enumerate_colorings(surf, lv)
    for row in cols[:: max(1, len(cols) // 20)]:
        assert is_admissible(row, surf, lv)
