"""Marked surfaces presented by banded trivalent graphs.

A surface with a pants decomposition is encoded by its spine: a trivalent
graph with a cyclic ordering of edge-ends at every internal vertex, plus
univalent vertices for the marked points.  Decomposition curves correspond
to edges; the genus is the first Betti number of the graph.

The mod-2 homology of the spine carries an intersection form computed
combinatorially: cycles are realized as closed walks, strands through a
shared band are ordered with a mirror rule at the two ends, and crossings
are counted by chord interleaving around each vertex disk.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np


class GraphFormatError(ValueError):
    """Malformed graph description."""


def _fraction(x) -> Fraction:
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return Fraction(x).limit_denominator(10**6)


_REGISTRY: dict[str, "Surface"] = {}


class Surface:
    """A validated banded trivalent graph with marked points.

    The JSON form is ``{"vertices": [{"id", "kind", "cyclic": [end ids]}],
    "edges": [{"id", "ends": [end, end]}], "marked": [{"vertex",
    "color_fraction"}]}``.  Edge order in the document fixes the coloring
    order used everywhere downstream.
    """

    def __init__(self, spec: dict, name: str = ""):
        self.name = name
        self.spec = spec
        edges = spec.get("edges", [])
        vertices = spec.get("vertices", [])
        marked = spec.get("marked", [])

        self.edge_ids = [e["id"] for e in edges]
        if len(set(self.edge_ids)) != len(self.edge_ids):
            raise GraphFormatError("duplicate edge ids")
        self.edge_index = {eid: i for i, eid in enumerate(self.edge_ids)}

        self._end_to_edge: dict[str, tuple[int, int]] = {}
        self.edge_ends: list[tuple[str, str]] = []
        for e in edges:
            ends = e.get("ends", [])
            if len(ends) != 2:
                raise GraphFormatError(f"edge {e['id']} needs exactly 2 ends")
            self.edge_ends.append((ends[0], ends[1]))
            for slot, end in enumerate(ends):
                if end in self._end_to_edge:
                    raise GraphFormatError(f"edge end {end} used twice")
                self._end_to_edge[end] = (self.edge_index[e["id"]], slot)

        self._vertices = {}
        self._end_vertex: dict[str, str] = {}
        seen_ends = set()
        for v in vertices:
            vid, kind = v["id"], v["kind"]
            cyc = list(v.get("cyclic", []))
            if kind == "internal" and len(cyc) != 3:
                raise GraphFormatError(f"internal vertex {vid} is not trivalent")
            if kind == "marked" and len(cyc) != 1:
                raise GraphFormatError(f"marked vertex {vid} is not univalent")
            if kind not in ("internal", "marked"):
                raise GraphFormatError(f"unknown vertex kind {kind!r}")
            if len(set(cyc)) != len(cyc):
                raise GraphFormatError(f"vertex {vid} repeats an edge end")
            for end in cyc:
                if end not in self._end_to_edge:
                    raise GraphFormatError(f"vertex {vid} lists unknown end {end}")
                if end in seen_ends:
                    raise GraphFormatError(f"edge end {end} attached twice")
                seen_ends.add(end)
                self._end_vertex[end] = vid
            self._vertices[vid] = {"kind": kind, "cyclic": cyc}
        dangling = set(self._end_to_edge) - seen_ends
        if dangling:
            raise GraphFormatError(f"dangling edge ends: {sorted(dangling)}")

        self.internal_vertex_ids = [v["id"] for v in vertices if v["kind"] == "internal"]
        self.marked_vertex_ids = [v["id"] for v in vertices if v["kind"] == "marked"]

        self.marked = []
        for m in marked:
            vid = m["vertex"]
            if vid not in self._vertices or self._vertices[vid]["kind"] != "marked":
                raise GraphFormatError(f"marked entry references non-marked vertex {vid}")
            self.marked.append((vid, _fraction(m["color_fraction"])))
        if {vid for vid, _ in self.marked} != set(self.marked_vertex_ids):
            raise GraphFormatError("marked entries must cover the univalent vertices")

        _REGISTRY[self.cache_key] = self

    # ---------- structure ----------

    @classmethod
    def from_json(cls, text: str, name: str = "") -> "Surface":
        return cls(json.loads(text), name=name)

    @property
    def cache_key(self) -> str:
        return self.name + "??" + json.dumps(self.spec, sort_keys=True, default=str)

    @property
    def edges(self):
        return self.edge_ids

    @cached_property
    def vertex_slots(self):
        """Per internal vertex: the (edge column, end slot) pairs in cyclic order."""
        out = []
        for vid in self.internal_vertex_ids:
            cyc = self._vertices[vid]["cyclic"]
            out.append(tuple(self._end_to_edge[end] for end in cyc))
        return out

    @cached_property
    def vertex_triples(self):
        """Per internal vertex: the 3 incident edge columns (loops repeat)."""
        return [tuple(col for col, _ in slots) for slots in self.vertex_slots]

    @cached_property
    def leg_columns(self):
        """Edge columns of boundary legs, in marked-point order."""
        cols = []
        for vid, _ in self.marked:
            end = self._vertices[vid]["cyclic"][0]
            cols.append(self._end_to_edge[end][0])
        return cols

    @property
    def boundary_fractions(self):
        return tuple(t for _, t in self.marked)

    @cached_property
    def internal_columns(self):
        legs = set(self.leg_columns)
        return [i for i in range(len(self.edge_ids)) if i not in legs]

    def edge_kind(self, col: int) -> str:
        a, b = self.edge_ends[col]
        va, vb = self._end_vertex[a], self._end_vertex[b]
        if self._vertices[va]["kind"] == "marked" or self._vertices[vb]["kind"] == "marked":
            return "leg"
        return "loop" if va == vb else "joining"

    @property
    def genus(self) -> int:
        return len(self.edge_ids) - len(self._vertices) + 1

    @property
    def n_marked(self) -> int:
        return len(self.marked)

    @property
    def euler_count(self) -> int:
        return len(self._vertices) - len(self.edge_ids)

    @cached_property
    def n_faces(self) -> int:
        """Boundary circles of the thickened graph (ribbon face count)."""
        ends = list(self._end_to_edge)
        nxt = {}
        for vid, data in self._vertices.items():
            cyc = data["cyclic"]
            for i, end in enumerate(cyc):
                nxt[end] = cyc[(i + 1) % len(cyc)]
        other = {}
        for a, b in self.edge_ends:
            other[a], other[b] = b, a
        seen, faces = set(), 0
        for start in ends:
            if start in seen:
                continue
            faces += 1
            cur = start
            while cur not in seen:
                seen.add(cur)
                cur = nxt[other[cur]]
        return faces

    # ---------- mod 2 homology of the spine ----------

    @cached_property
    def h1(self) -> "H1Data":
        return H1Data(self)

    def __repr__(self):
        return (f"Surface({self.name or 'anonymous'}: genus {self.genus}, "
                f"{self.n_marked} marked, edges {self.edge_ids})")


def surface_from_key(key: str) -> Surface:
    if key in _REGISTRY:
        return _REGISTRY[key]
    name, _, payload = key.partition("??")
    return Surface(json.loads(payload), name=name)


class H1Data:
    """Cycle-space basis and intersection form of the internal graph.

    The basis comes from the chords of a spanning tree taken in edge order,
    one fundamental cycle per chord; classes are coordinate vectors over
    this basis.  Boundary legs never appear in cycles.
    """

    def __init__(self, surface: Surface):
        self.surface = surface
        self._build_basis()
        self._build_form()

    def _build_basis(self):
        surf = self.surface
        verts = list(surf.internal_vertex_ids)
        vset = set(verts)
        adj: dict[str, list[tuple[int, str]]] = {v: [] for v in verts}
        for col in surf.internal_columns:
            a, b = surf.edge_ends[col]
            va, vb = surf._end_vertex[a], surf._end_vertex[b]
            if va in vset and vb in vset:
                adj[va].append((col, vb))
                adj[vb].append((col, va))

        tree_cols: set[int] = set()
        parent: dict[str, tuple[str, int] | None] = {}
        for root in verts:
            if root in parent:
                continue
            parent[root] = None
            queue = [root]
            while queue:
                v = queue.pop(0)
                for col, w in sorted(adj[v]):
                    if w not in parent and col not in tree_cols:
                        parent[w] = (v, col)
                        tree_cols.add(col)
                        queue.append(w)

        ne = len(surf.edge_ids)
        chords = [c for c in surf.internal_columns
                  if c not in tree_cols and surf.edge_kind(c) != "leg"]
        basis = []
        for chord in chords:
            vec = np.zeros(ne, dtype=np.uint8)
            vec[chord] = 1
            a, b = surf.edge_ends[chord]
            va, vb = surf._end_vertex[a], surf._end_vertex[b]
            for v in (va, vb):
                while parent[v] is not None:
                    up, col = parent[v]
                    vec[col] ^= 1
                    v = up
            basis.append(vec)
        self.basis = basis
        self.dim = len(basis)
        self._echelon = _gf2_echelon(np.array(basis, dtype=np.uint8).reshape(self.dim, ne))

    def _build_form(self):
        g = self.dim
        form = np.zeros((g, g), dtype=np.uint8)
        walks = [self._walk(vec) for vec in self.basis]
        for i in range(g):
            for j in range(i + 1, g):
                form[i, j] = form[j, i] = self._crossings(walks[i], walks[j]) % 2
        self.form = form

    def _walk(self, parity_vec):
        """Realize a cycle as a closed walk: band traversals plus vertex
        transits (pairs of edge ends)."""
        surf = self.surface
        support = {c for c in np.nonzero(parity_vec)[0]}
        ends_at: dict[str, list[str]] = {}
        for col in support:
            for end in surf.edge_ends[col]:
                ends_at.setdefault(surf._end_vertex[end], []).append(end)
        for v, ends in ends_at.items():
            if len(ends) != 2:
                raise ValueError("cycle support does not define a simple walk")

        other = {}
        for a, b in surf.edge_ends:
            other[a], other[b] = b, a

        transits = []  # (vertex id, in end, out end)
        traversed = []  # (col, entry end)
        start_col = min(support)
        start = surf.edge_ends[start_col][0]
        cur = start
        while True:
            traversed.append((surf._end_to_edge[cur][0], cur))
            arrive = other[cur]
            v = surf._end_vertex[arrive]
            pair = ends_at[v]
            leave = pair[0] if pair[1] == arrive else pair[1]
            transits.append((v, arrive, leave))
            cur = leave
            if cur == start:
                break
        return {"traversed": {c: e for c, e in traversed},
                "transits": transits}

    def _crossings(self, walk_a, walk_b) -> int:
        """Interleaving count of two closed walks pushed off the spine.

        The ambient surface is the boundary of a 3-dimensional
        neighborhood, so an edge carries strands through a tube and their
        circular order is the same at both tube ends.  Around each vertex
        sphere the walk transits become chords; crossings are chord
        interleavings in the cyclic order of strand endpoints.
        """
        surf = self.surface
        total = 0
        for vi, vid in enumerate(surf.internal_vertex_ids):
            tokens = []  # (end, label) in disk cyclic order
            for end in surf._vertices[vid]["cyclic"]:
                col, slot = surf._end_to_edge[end]
                here = []
                if col in walk_a["traversed"]:
                    here.append("a")
                if col in walk_b["traversed"]:
                    here.append("b")
                tokens.extend((end, lab) for lab in here)
            pos = {tok: i for i, tok in enumerate(tokens)}
            chords = {"a": [], "b": []}
            for lab, walk in (("a", walk_a), ("b", walk_b)):
                for v, ein, eout in walk["transits"]:
                    if v == vid:
                        chords[lab].append((pos[(ein, lab)], pos[(eout, lab)]))
            n = len(tokens)
            for p1, p2 in chords["a"]:
                for q1, q2 in chords["b"]:
                    lo, hi = min(p1, p2), max(p1, p2)
                    inside = sum(1 for q in (q1, q2) if lo < q < hi)
                    total += inside % 2
        return total

    # ---------- class arithmetic ----------

    def zero(self):
        return tuple([0] * self.dim)

    def reduce(self, parity_vec) -> tuple:
        """Coordinates of an edge-parity cycle in the chord basis."""
        vec = np.asarray(parity_vec, dtype=np.uint8) % 2
        coords, residue = _gf2_solve(self._echelon, vec)
        if residue.any():
            raise ValueError("edge parities do not form a cycle of the spine")
        return tuple(int(x) for x in coords)

    def pairing(self, x, y) -> int:
        x = np.asarray(x, dtype=np.uint8)
        y = np.asarray(y, dtype=np.uint8)
        return int(x @ self.form @ y % 2)


def _gf2_echelon(rows: np.ndarray):
    """Row echelon over GF(2), remembering the combination of input rows."""
    m, n = rows.shape
    work = rows.copy()
    trans = np.eye(m, dtype=np.uint8)
    pivots = []
    rank = 0
    for col in range(n):
        sel = None
        for i in range(rank, m):
            if work[i, col]:
                sel = i
                break
        if sel is None:
            continue
        work[[rank, sel]] = work[[sel, rank]]
        trans[[rank, sel]] = trans[[sel, rank]]
        for i in range(m):
            if i != rank and work[i, col]:
                work[i] ^= work[rank]
                trans[i] ^= trans[rank]
        pivots.append(col)
        rank += 1
        if rank == m:
            break
    return {"rows": work, "trans": trans, "pivots": pivots, "shape": (m, n)}


def _gf2_solve(ech, vec: np.ndarray):
    """Express vec in the row space; returns (coefficients, residue)."""
    m, n = ech["shape"]
    v = vec.copy()
    coeff = np.zeros(m, dtype=np.uint8)
    for i, col in enumerate(ech["pivots"]):
        if v[col]:
            v ^= ech["rows"][i]
            coeff ^= ech["trans"][i]
    return coeff, v


@dataclass(frozen=True)
class Character:
    """A quadratic refinement of the intersection form.

    Determined by its values on basis classes; the quadratic rule
    q(x+y) = q(x) + q(y) + <x,y> extends it to every class.
    """

    qbits: tuple
    form: tuple  # rows of the intersection matrix, as tuples

    def q(self, coords) -> int:
        x = tuple(int(c) % 2 for c in coords)
        val = sum(b * c for b, c in zip(self.qbits, x))
        g = len(x)
        for i in range(g):
            for j in range(i + 1, g):
                val += x[i] * x[j] * self.form[i][j]
        return val % 2

    def sign(self, coords) -> int:
        return -1 if self.q(coords) else 1

    @property
    def label(self) -> str:
        return "chi" + "".join(str(b) for b in self.qbits)


def characters(surface: Surface) -> list:
    """All 2^g characters of the intersection algebra."""
    h1 = surface.h1
    form = tuple(tuple(int(x) for x in row) for row in h1.form)
    out = []
    for bits in np.ndindex(*([2] * h1.dim)):
        out.append(Character(tuple(int(b) for b in bits), form))
    return out


class AlgebraElement:
    """Finite complex combination of homology classes.

    The product twists addition by the intersection sign:
    [x] * [y] = (-1)^{<x,y>} [x+y].
    """

    def __init__(self, surface: Surface, terms: dict | None = None):
        self.surface = surface
        self.terms = {tuple(k): complex(v) for k, v in (terms or {}).items()}

    @classmethod
    def basis_class(cls, surface: Surface, coords):
        return cls(surface, {tuple(coords): 1.0})

    def __add__(self, rhs):
        out = dict(self.terms)
        for k, v in rhs.terms.items():
            out[k] = out.get(k, 0.0) + v
        return AlgebraElement(self.surface, out)

    def __mul__(self, rhs):
        if isinstance(rhs, (int, float, complex)):
            return AlgebraElement(
                self.surface, {k: v * rhs for k, v in self.terms.items()})
        if rhs.surface.cache_key != self.surface.cache_key:
            raise ValueError("algebra elements over different graphs")
        h1 = self.surface.h1
        out: dict[tuple, complex] = {}
        for ka, va in self.terms.items():
            for kb, vb in rhs.terms.items():
                sign = -1.0 if h1.pairing(ka, kb) else 1.0
                key = tuple((a + b) % 2 for a, b in zip(ka, kb))
                out[key] = out.get(key, 0.0) + sign * va * vb
        return AlgebraElement(self.surface, out)

    __rmul__ = __mul__

    def evaluate(self, character: Character) -> complex:
        return sum(v * character.sign(k) for k, v in self.terms.items())

    def __repr__(self):
        return f"AlgebraElement({self.terms})"


# ---------- built-in test surfaces ----------


def punctured_torus(fraction="1/2") -> Surface:
    """One internal vertex, a loop edge, and one boundary leg (genus 1)."""
    spec = {
        "vertices": [
            {"id": "v0", "kind": "internal", "cyclic": ["e.0", "e.1", "l.0"]},
            {"id": "p0", "kind": "marked", "cyclic": ["l.1"]},
        ],
        "edges": [
            {"id": "e", "ends": ["e.0", "e.1"]},
            {"id": "l", "ends": ["l.0", "l.1"]},
        ],
        "marked": [{"vertex": "p0", "color_fraction": str(fraction)}],
    }
    return Surface(spec, name="punctured-torus")


def four_holed_sphere(fractions=("1/2", "1/2", "1/2", "1/2")) -> Surface:
    """Two internal vertices joined by one edge, four boundary legs (genus 0)."""
    spec = {
        "vertices": [
            {"id": "v0", "kind": "internal", "cyclic": ["l1.0", "l2.0", "m.0"]},
            {"id": "v1", "kind": "internal", "cyclic": ["m.1", "l3.0", "l4.0"]},
            {"id": "p1", "kind": "marked", "cyclic": ["l1.1"]},
            {"id": "p2", "kind": "marked", "cyclic": ["l2.1"]},
            {"id": "p3", "kind": "marked", "cyclic": ["l3.1"]},
            {"id": "p4", "kind": "marked", "cyclic": ["l4.1"]},
        ],
        "edges": [
            {"id": "m", "ends": ["m.0", "m.1"]},
            {"id": "l1", "ends": ["l1.0", "l1.1"]},
            {"id": "l2", "ends": ["l2.0", "l2.1"]},
            {"id": "l3", "ends": ["l3.0", "l3.1"]},
            {"id": "l4", "ends": ["l4.0", "l4.1"]},
        ],
        "marked": [
            {"vertex": "p1", "color_fraction": str(fractions[0])},
            {"vertex": "p2", "color_fraction": str(fractions[1])},
            {"vertex": "p3", "color_fraction": str(fractions[2])},
            {"vertex": "p4", "color_fraction": str(fractions[3])},
        ],
    }
    return Surface(spec, name="four-holed-sphere")


def genus2_theta() -> Surface:
    """Two internal vertices and three parallel edges (closed genus 2)."""
    spec = {
        "vertices": [
            {"id": "v0", "kind": "internal", "cyclic": ["e.0", "f.0", "g.0"]},
            {"id": "v1", "kind": "internal", "cyclic": ["e.1", "g.1", "f.1"]},
        ],
        "edges": [
            {"id": "e", "ends": ["e.0", "e.1"]},
            {"id": "f", "ends": ["f.0", "f.1"]},
            {"id": "g", "ends": ["g.0", "g.1"]},
        ],
        "marked": [],
    }
    return Surface(spec, name="genus2")


_BUILTIN = {
    "punctured-torus": punctured_torus,
    "four-holed-sphere": four_holed_sphere,
    "genus2": genus2_theta,
}


def get_surface(name: str) -> Surface:
    """Look up a built-in test surface by name."""
    try:
        return _BUILTIN[name]()
    except KeyError:
        raise KeyError(
            f"unknown surface {name!r}; built-ins: {sorted(_BUILTIN)}") from None
