"""Dehn-position multicurves: construction, twisting, unions, homology."""
import numpy as np
import pytest

from curveops import curves as cv
from curveops.curves import (CurveFormatError, MulticurveSpec, PantsArcs,
                             apply_dehn_twist, curve_core, curve_dual,
                             curve_word, intersection_sign, project_class,
                             standard_curve, union)


def test_core_basics(genus2):
    c = curve_core(genus2, "e")
    assert c.label == "C[e]"
    assert c.n_components == 1
    assert np.array_equal(c.intersection_vector(), [0, 0, 0])
    assert c.core_counts() == {"e": 1}
    c2 = curve_core(genus2, "e", count=3)
    assert c2.label == "C[e]x3"
    assert c2.n_components == 3


def test_core_rejects_leg(ptorus):
    with pytest.raises(CurveFormatError):
        curve_core(ptorus, "l")


def test_dual_loop_edge(ptorus):
    d = curve_dual(ptorus, "e")
    assert d.intersection("e") == 1          # one strand crosses a loop edge
    assert d.annuli["e"].pattern == 2
    arcs = d.pants["v0"]
    assert arcs.alpha + arcs.beta + arcs.gamma == 1
    assert not any(arcs.turnbacks)


def test_dual_joining_edge(genus2):
    d = curve_dual(genus2, "f")
    assert d.intersection("f") == 2          # two strands cross a joining edge
    for vid in ("v0", "v1"):
        assert sum(d.pants[vid].turnbacks) == 1


def test_dual_rejects_leg(foursphere):
    with pytest.raises(CurveFormatError):
        curve_dual(foursphere, "l2")


def test_strand_matching_enforced(genus2):
    # pants arcs must agree with the annulus strand count on every edge
    with pytest.raises(CurveFormatError, match="strands"):
        MulticurveSpec(genus2, {"v0": PantsArcs(alpha=1)}, {})


def test_twist_bookkeeping(genus2):
    d = curve_dual(genus2, "e")
    t = apply_dehn_twist(d, "e", 2)
    assert t.annuli["e"].twist == 2
    assert t.label == "tw[e,+2](D[e])"
    assert np.array_equal(t.intersection_vector(), d.intersection_vector())
    # twisting along a disjoint circle is a no-op
    c = curve_core(genus2, "f")
    assert apply_dehn_twist(c, "e", 5) is c
    assert apply_dehn_twist(d, "e", 0) is d


def test_twist_composes(genus2):
    d = curve_dual(genus2, "g")
    t = apply_dehn_twist(apply_dehn_twist(d, "g", 1), "g", 1)
    assert t.annuli["g"].twist == 2


def test_union_counts(genus2):
    u = union(curve_core(genus2, "e"), curve_dual(genus2, "f"))
    assert u.label == "C[e] u D[f]"
    assert u.n_components == 2
    assert u.core_counts() == {"e": 1}
    assert u.intersection("f") == 2


def test_union_clash(genus2):
    d = curve_dual(genus2, "e")
    t = apply_dehn_twist(d, "e", 1)
    with pytest.raises(CurveFormatError, match="clash"):
        union(d, t)


def test_union_requires_same_surface(ptorus, genus2):
    with pytest.raises(CurveFormatError):
        union(curve_core(ptorus, "e"), curve_core(genus2, "e"))


def test_standard_curve_dispatch(genus2):
    assert standard_curve("core", genus2, "e").label == "C[e]"
    assert standard_curve("dual", genus2, "e").label == "D[e]"
    tw = standard_curve("twisted-dual", genus2, "e", m=-1)
    assert tw.label == "tw[e,-1](D[e])"
    with pytest.raises(KeyError):
        standard_curve("spiral", genus2, "e")


def test_project_class(ptorus, genus2):
    # classes follow shift-support parity: one strand odd, two strands even
    assert project_class(curve_core(ptorus, "e")) == (0,)
    assert project_class(curve_dual(ptorus, "e")) == (1,)
    for eid in "efg":
        assert project_class(curve_dual(genus2, eid)) == (0, 0)


def test_intersection_sign_pairs(ptorus, genus2):
    # library cell totals are even, so every library pair is +1
    cp = curve_core(ptorus, "e")
    dp = curve_dual(ptorus, "e")
    assert intersection_sign(cp, dp) == 1
    assert intersection_sign(cp, cp) == 1
    assert intersection_sign(curve_core(genus2, "e"),
                             curve_dual(genus2, "e")) == 1
    # an odd cell total against an odd strand count flips the sign
    import dataclasses
    odd = dataclasses.replace(cp, cells={"e": (1, 0)})
    assert intersection_sign(odd, dp) == -1
    assert intersection_sign(odd, curve_core(ptorus, "e")) == 1


def test_intersection_sign_matches_homology_pairing(genus2):
    # the operator-ordering sign equals the mod-2 pairing of the classes
    library = [curve_core(genus2, e) for e in "efg"]
    library += [curve_dual(genus2, e) for e in "efg"]
    h1 = genus2.h1
    for a in library:
        for b in library:
            want = -1 if h1.pairing(project_class(a), project_class(b)) else 1
            assert intersection_sign(a, b) == want


def test_cocycle_sign_trivial_for_library(genus2, rng):
    # library crossing totals are even, so the sign is identically +1
    colors = rng.integers(1, 9, size=(6, 3))
    for spec in (curve_core(genus2, "e"), curve_dual(genus2, "f"),
                 apply_dehn_twist(curve_dual(genus2, "e"), "e", 1)):
        assert np.all(cv.cocycle_sign(colors, spec) == 1)


def test_json_roundtrip(genus2):
    d = apply_dehn_twist(curve_dual(genus2, "e"), "e", 3)
    again = MulticurveSpec.from_json(genus2, d.to_json())
    assert again.label == d.label
    assert again.annuli == d.annuli
    assert again.pants == d.pants
    assert again.cells == d.cells


def test_curve_words(ptorus, foursphere, genus2):
    assert curve_word(curve_core(ptorus, "e")).words == ("a",)
    assert curve_word(curve_dual(foursphere, "m")).words == ("x1 x3",)
    u = union(curve_core(genus2, "e"), curve_dual(genus2, "f"))
    assert curve_word(u).words == ("Ce", "Df")
    x2 = curve_core(genus2, "e", count=2)
    assert curve_word(x2).words == ("Ce", "Ce")
