"""Multicurves in Dehn position on a decomposed surface.

A multicurve is recorded by local data: arc counts inside each pants
(pairwise arcs between the three boundary circles, plus arcs returning to
the boundary they started from) and a pattern in each gluing annulus with
a twisting integer.  The standard library (cores, duals, twists, unions)
covers everything the verification suites touch; raw data entry stays
open for experiments.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import surface as sf


@dataclass(frozen=True)
class PantsArcs:
    """Arc counts in one pants, boundaries taken in vertex cyclic order.

    alpha joins boundaries 2-3, beta joins 1-3, gamma joins 1-2;
    turnbacks[i] arcs leave boundary i+1 and return to it.
    """

    alpha: int = 0
    beta: int = 0
    gamma: int = 0
    turnbacks: tuple = (0, 0, 0)

    def strands_at(self, slot: int) -> int:
        pair = (self.beta + self.gamma, self.alpha + self.gamma,
                self.alpha + self.beta)[slot]
        return pair + 2 * self.turnbacks[slot]

    def is_zero(self) -> bool:
        return not (self.alpha or self.beta or self.gamma or any(self.turnbacks))


# pattern 1: parallel copies of the core circle
# pattern 2: strands crossing the annulus, with integer twisting
# pattern 3: strand exchange inside the annulus (recognized, not computed)
@dataclass(frozen=True)
class AnnulusData:
    pattern: int
    count: int = 1
    twist: int = 0


class CurveFormatError(ValueError):
    """Inconsistent Dehn position data."""


@dataclass(frozen=True)
class MulticurveSpec:
    """A multicurve described by its Dehn position.

    ``cells`` stores, per edge, the crossing counts with the two dual
    cell curves flanking that edge; the sign cocycle reads only their
    total parity.
    """

    surface: sf.Surface
    pants: dict
    annuli: dict
    n_components: int = 1
    cells: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        surf = self.surface
        for vid in self.pants:
            if vid not in surf.internal_vertex_ids:
                raise CurveFormatError(f"pants data on unknown vertex {vid}")
        strands = {}
        for vi, vid in enumerate(surf.internal_vertex_ids):
            arcs = self.pants.get(vid, PantsArcs())
            for slot, (col, _) in enumerate(surf.vertex_slots[vi]):
                end = surf._vertices[vid]["cyclic"][slot]
                strands[end] = arcs.strands_at(slot)
        for eid, ann in self.annuli.items():
            if eid not in surf.edge_index:
                raise CurveFormatError(f"annulus data on unknown edge {eid}")
            if surf.edge_kind(surf.edge_index[eid]) == "leg":
                raise CurveFormatError(f"edge {eid} is a boundary leg")
            if ann.pattern not in (1, 2, 3):
                raise CurveFormatError(f"annulus pattern {ann.pattern} unknown")
        for col, (end_a, end_b) in enumerate(surf.edge_ends):
            eid = surf.edge_ids[col]
            ann = self.annuli.get(eid)
            if surf.edge_kind(col) == "leg":
                hits = [strands.get(e, 0) for e in (end_a, end_b)]
                if any(hits):
                    raise CurveFormatError(f"curve strands meet boundary leg {eid}")
                continue
            sa, sb = strands.get(end_a, 0), strands.get(end_b, 0)
            if sa != sb:
                raise CurveFormatError(
                    f"edge {eid}: {sa} strands from one side, {sb} from the other")
            through = ann.count if ann is not None and ann.pattern in (2, 3) else 0
            if through != sa:
                raise CurveFormatError(
                    f"edge {eid}: annulus carries {through} strands, pants give {sa}")
            if ann is not None and ann.pattern == 1 and sa != 0:
                raise CurveFormatError(
                    f"edge {eid}: core circles cannot coexist with crossing strands")

    # ---------- queries ----------

    def intersection(self, eid: str) -> int:
        """Geometric intersection count with the decomposition circle at eid."""
        ann = self.annuli.get(eid)
        if ann is None or ann.pattern == 1:
            return 0
        return ann.count

    def intersection_vector(self) -> np.ndarray:
        return np.array([self.intersection(eid) for eid in self.surface.edge_ids],
                        dtype=np.int64)

    def core_counts(self) -> dict:
        return {eid: ann.count for eid, ann in self.annuli.items()
                if ann.pattern == 1}

    def cell_crossings(self, eid: str) -> tuple:
        return self.cells.get(eid, (0, 0))

    # ---------- serialization ----------

    def to_json(self) -> str:
        doc = {
            "pants": {
                vid: {"alpha": p.alpha, "beta": p.beta, "gamma": p.gamma,
                      **({"turnbacks": list(p.turnbacks)} if any(p.turnbacks) else {})}
                for vid, p in self.pants.items() if not p.is_zero()},
            "annuli": {
                eid: {"pattern": a.pattern, "count": a.count, "twist": a.twist}
                for eid, a in self.annuli.items()},
            "n_components": self.n_components,
        }
        if self.cells:
            doc["cells"] = {eid: list(v) for eid, v in self.cells.items()}
        if self.label:
            doc["label"] = self.label
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, surf: sf.Surface, text: str) -> "MulticurveSpec":
        doc = json.loads(text)
        pants = {}
        for vid, p in doc.get("pants", {}).items():
            pants[vid] = PantsArcs(p.get("alpha", 0), p.get("beta", 0),
                                   p.get("gamma", 0),
                                   tuple(p.get("turnbacks", (0, 0, 0))))
        annuli = {eid: AnnulusData(a["pattern"], a.get("count", 1), a.get("twist", 0))
                  for eid, a in doc.get("annuli", {}).items()}
        cells = {eid: tuple(v) for eid, v in doc.get("cells", {}).items()}
        return cls(surf, pants, annuli, doc.get("n_components", 1), cells,
                   doc.get("label", ""))


# ---------- the standard library ----------


def curve_core(surf: sf.Surface, eid: str, count: int = 1) -> MulticurveSpec:
    """count parallel copies of the decomposition circle at edge eid."""
    col = surf.edge_index[eid]
    if surf.edge_kind(col) == "leg":
        raise CurveFormatError(f"edge {eid} is a boundary leg")
    return MulticurveSpec(
        surf, {}, {eid: AnnulusData(1, count, 0)},
        n_components=count, cells={eid: (count, count)},
        label=f"C[{eid}]" + (f"x{count}" if count > 1 else ""))


def curve_dual(surf: sf.Surface, eid: str) -> MulticurveSpec:
    """The dual circle at edge eid: one strand around a loop edge, or a
    two-strand loop with a turnback in each adjacent pants."""
    col = surf.edge_index[eid]
    kind = surf.edge_kind(col)
    if kind == "leg":
        raise CurveFormatError(f"edge {eid} is a boundary leg")
    end_a, end_b = surf.edge_ends[col]
    if kind == "loop":
        vid = surf._end_vertex[end_a]
        vi = surf.internal_vertex_ids.index(vid)
        slots = [i for i, (c, _) in enumerate(surf.vertex_slots[vi]) if c == col]
        pair = tuple(sorted(slots))
        which = {(1, 2): "alpha", (0, 2): "beta", (0, 1): "gamma"}[pair]
        pants = {vid: PantsArcs(**{which: 1})}
        ann = {eid: AnnulusData(2, 1, 0)}
    else:
        pants = {}
        for end in (end_a, end_b):
            vid = surf._end_vertex[end]
            vi = surf.internal_vertex_ids.index(vid)
            slot = next(i for i, (c, _) in enumerate(surf.vertex_slots[vi])
                        if surf._vertices[vid]["cyclic"][i] == end)
            tb = [0, 0, 0]
            tb[slot] = 1
            pants[vid] = PantsArcs(turnbacks=tuple(tb))
        ann = {eid: AnnulusData(2, 2, 0)}
    return MulticurveSpec(surf, pants, ann, n_components=1,
                          cells={eid: (1, 1)}, label=f"D[{eid}]")


def apply_dehn_twist(spec: MulticurveSpec, eid: str, m: int) -> MulticurveSpec:
    """Twist along the decomposition circle at eid, m times."""
    if m == 0:
        return spec
    ann = dict(spec.annuli)
    cur = ann.get(eid)
    if cur is None or cur.pattern == 1 or cur.count == 0:
        return spec  # disjoint from the twisting circle
    ann[eid] = replace(cur, twist=cur.twist + m)
    cells = dict(spec.cells)
    a, b = cells.get(eid, (0, 0))
    cells[eid] = (a + abs(m) * cur.count, b + abs(m) * cur.count)
    label = f"tw[{eid},{m:+d}]({spec.label})"
    return MulticurveSpec(spec.surface, spec.pants, ann, spec.n_components,
                          cells, label)


def union(a: MulticurveSpec, b: MulticurveSpec) -> MulticurveSpec:
    """Disjoint union of two multicurves in Dehn position.

    Dehn data adds componentwise; annulus entries at a shared edge must
    agree in pattern and twist (parallel strands), else the factors are
    not in disjoint position.
    """
    if a.surface.cache_key != b.surface.cache_key:
        raise CurveFormatError("curves live on different surfaces")
    pants = {}
    for vid in set(a.pants) | set(b.pants):
        pa = a.pants.get(vid, PantsArcs())
        pb = b.pants.get(vid, PantsArcs())
        pants[vid] = PantsArcs(
            pa.alpha + pb.alpha, pa.beta + pb.beta, pa.gamma + pb.gamma,
            tuple(x + y for x, y in zip(pa.turnbacks, pb.turnbacks)))
    annuli = dict(a.annuli)
    for eid, ann in b.annuli.items():
        if eid in annuli:
            cur = annuli[eid]
            if cur.pattern != ann.pattern or cur.twist != ann.twist:
                raise CurveFormatError(
                    f"edge {eid}: annulus patterns clash; union is not disjoint")
            annuli[eid] = replace(ann, count=cur.count + ann.count)
        else:
            annuli[eid] = ann
    cells = {eid: (0, 0) for eid in set(a.cells) | set(b.cells)}
    for src in (a.cells, b.cells):
        for eid, (x, y) in src.items():
            cx, cy = cells[eid]
            cells[eid] = (cx + x, cy + y)
    return MulticurveSpec(a.surface, pants, annuli,
                          a.n_components + b.n_components, cells,
                          label=f"{a.label} u {b.label}")


def standard_curve(kind: str, surf: sf.Surface, eid: str, m: int = 0) -> MulticurveSpec:
    """Library lookup: kind in {"core", "dual", "twisted-dual"}."""
    if kind == "core":
        return curve_core(surf, eid)
    if kind == "dual":
        return curve_dual(surf, eid)
    if kind == "twisted-dual":
        return apply_dehn_twist(curve_dual(surf, eid), eid, m)
    raise KeyError(f"unknown curve kind {kind!r}")


# ---------- homology bookkeeping ----------


def project_class(spec: MulticurveSpec) -> tuple:
    """Coordinates of the curve's mod-2 class in the chord basis."""
    parities = spec.intersection_vector() % 2
    return spec.surface.h1.reduce(parities)


def cocycle_sign(colors: np.ndarray, spec: MulticurveSpec) -> np.ndarray:
    """The basis-normalization sign, per coloring row.

    Product over edges of (-1)^((c_e - 1) * total cell crossings); the
    standard library always yields +1 because its crossing totals are even.
    """
    colors = np.atleast_2d(np.asarray(colors))
    out = np.ones(len(colors), dtype=np.int64)
    for eid, (x, y) in spec.cells.items():
        col = spec.surface.edge_index[eid]
        out *= np.where((colors[:, col] - 1) * (x + y) % 2, -1, 1)
    return out


def intersection_sign(gamma: MulticurveSpec, delta: MulticurveSpec) -> int:
    """(-1) to the crossing-parity pairing of two multicurves."""
    val = 0
    for eid in delta.surface.edge_ids:
        x, y = gamma.cell_crossings(eid)
        val += delta.intersection(eid) * (x + y)
    return -1 if val % 2 else 1


# ---------- words for the trace oracle ----------


@dataclass(frozen=True)
class CurveWord:
    """Free-homotopy words, one per component, in the surface's fixed
    generators."""

    words: tuple
    n_components: int


_WORD_TABLE = {
    ("punctured-torus", "C[e]"): "a",
    ("punctured-torus", "D[e]"): "b",
    ("four-holed-sphere", "C[m]"): "x1 x2",
    ("four-holed-sphere", "D[m]"): "x1 x3",
    ("genus2", "C[e]"): "Ce",
    ("genus2", "C[f]"): "Cf",
    ("genus2", "C[g]"): "Cg",
    ("genus2", "D[e]"): "De",
    ("genus2", "D[f]"): "Df",
    ("genus2", "D[g]"): "Dg",
}


def curve_word(spec: MulticurveSpec) -> CurveWord:
    """Look up the component words for a library curve.

    Twisted curves are handled upstream by shearing the angle variables,
    so only untwisted library labels appear here.
    """
    name = spec.surface.name
    parts = [p for p in spec.label.split(" u ") if p]
    words = []
    for part in parts:
        core_count = 1
        base = part
        if "x" in part and part.startswith("C["):
            base, _, mult = part.partition("x")
            core_count = int(mult)
        key = (name, base)
        if key not in _WORD_TABLE:
            raise KeyError(f"curve {part!r} not in word table for {name}")
        words.extend([_WORD_TABLE[key]] * core_count)
    if not words:
        raise KeyError(f"curve {spec.label!r} not in word table for {name}")
    return CurveWord(tuple(words), spec.n_components)
