"""Immutable partitioned graphs on bitset adjacency rows.

A vertex set is a plain Python ``int`` used as a bitset: bit ``v`` is set
when vertex ``v`` belongs to the set.  Intersection is ``&``, size is
``.bit_count()``.  Every kernel in the package reduces to intersecting
neighbourhood rows, so this keeps the inner loops in C.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import PreconditionViolated

VertexSet = int

UNASSIGNED = -1


# ---------------------------------------------------------------- bitsets

def vset(vertices: Iterable[int]) -> VertexSet:
    bits = 0
    for v in vertices:
        bits |= 1 << v
    return bits


def members(bits: VertexSet) -> list[int]:
    """Sorted list of the vertices in ``bits``."""
    if not bits:
        return []
    s = bin(bits)[:1:-1]
    return [i for i, c in enumerate(s) if c == "1"]


def lowest(bits: VertexSet) -> int:
    """Smallest member; ``-1`` for the empty set."""
    return (bits & -bits).bit_length() - 1


def bits_from_mask(mask: np.ndarray) -> VertexSet:
    packed = np.packbits(np.asarray(mask, dtype=bool), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def mask_from_bits(bits: VertexSet, n: int) -> np.ndarray:
    raw = bits.to_bytes((n + 7) // 8 or 1, "little")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:n].astype(bool)


def full(n: int) -> VertexSet:
    return (1 << n) - 1


# ---------------------------------------------------------------- graphs

class PartitionedGraph:
    """Undirected simple graph with optional vertex parts.

    ``adj[v]`` is the neighbourhood bitset of ``v``.  ``parts`` are disjoint
    bitsets; ``part_of[v]`` is the index of the part holding ``v`` or
    ``UNASSIGNED``.  With ``strict=True`` every edge must join two distinct
    parts.
    """

    __slots__ = ("n", "adj", "parts", "part_of", "strict", "meta", "_matrix")

    def __init__(
        self,
        n: int,
        adj: Sequence[int],
        parts: Sequence[int] = (),
        *,
        strict: bool = False,
        meta: dict | None = None,
        check: bool = True,
    ):
        self.n = int(n)
        self.adj = tuple(adj)
        self.parts = tuple(parts)
        self.strict = strict
        self.meta = dict(meta or {})
        self._matrix = None
        if len(self.adj) != self.n:
            raise PreconditionViolated("adjacency has %d rows for n=%d" % (len(self.adj), self.n))
        part_of = [UNASSIGNED] * self.n
        seen = 0
        for i, p in enumerate(self.parts):
            if p & seen:
                raise PreconditionViolated("parts are not disjoint", part=i)
            if p >> self.n:
                raise PreconditionViolated("part %d has vertices outside [n]" % i)
            seen |= p
            for v in members(p):
                part_of[v] = i
        self.part_of = tuple(part_of)
        if check:
            self._validate()

    def _validate(self) -> None:
        everything = full(self.n)
        for v, row in enumerate(self.adj):
            if row >> v & 1:
                raise PreconditionViolated("self-loop at vertex %d" % v)
            if row & ~everything:
                raise PreconditionViolated("row %d points outside [n]" % v)
        m = self.matrix()
        if not np.array_equal(m, m.T):
            raise PreconditionViolated("adjacency is not symmetric")
        if self.strict:
            for i, p in enumerate(self.parts):
                for v in members(p):
                    if self.adj[v] & p:
                        raise PreconditionViolated("edge inside part %d at vertex %d" % (i, v))
            if self.n and not all(x != UNASSIGNED for x in self.part_of):
                raise PreconditionViolated("strict mode needs every vertex in a part")

    # construction -----------------------------------------------------
    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], parts: Sequence[Iterable[int]] | None = None,
                   *, strict: bool = False, meta: dict | None = None) -> "PartitionedGraph":
        adj = [0] * n
        for u, v in edges:
            if u == v:
                raise PreconditionViolated("self-loop edge (%d, %d)" % (u, v))
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        part_bits = [vset(p) for p in parts] if parts is not None else []
        return cls(n, adj, part_bits, strict=strict, meta=meta)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, parts: Sequence[int] = (), *, strict: bool = False,
                    meta: dict | None = None) -> "PartitionedGraph":
        m = np.asarray(matrix, dtype=bool)
        n = m.shape[0]
        packed = np.packbits(m, axis=1, bitorder="little")
        adj = [int.from_bytes(row.tobytes(), "little") for row in packed]
        g = cls(n, adj, parts, strict=strict, meta=meta, check=False)
        g._matrix = m.astype(np.uint8)
        g._validate()
        return g

    # queries ------------------------------------------------------------
    @property
    def vertices(self) -> VertexSet:
        return full(self.n)

    @property
    def r(self) -> int:
        return len(self.parts)

    def matrix(self) -> np.ndarray:
        """Dense 0/1 ``uint8`` adjacency matrix (cached)."""
        if self._matrix is None:
            nbytes = (self.n + 7) // 8 or 1
            buf = b"".join(row.to_bytes(nbytes, "little") for row in self.adj)
            arr = np.frombuffer(buf, dtype=np.uint8).reshape(self.n, nbytes)
            self._matrix = np.unpackbits(arr, axis=1, bitorder="little")[:, : self.n].copy()
        return self._matrix

    def neighbors(self, v: int) -> VertexSet:
        return self.adj[v]

    def degree(self, v: int, within: VertexSet | None = None) -> int:
        row = self.adj[v]
        return (row if within is None else row & within).bit_count()

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adj[u] >> v & 1)

    def num_edges(self) -> int:
        return sum(row.bit_count() for row in self.adj) // 2

    def edges(self) -> Iterator[tuple[int, int]]:
        for u, row in enumerate(self.adj):
            for v in members(row >> (u + 1)):
                yield u, u + 1 + v

    def induced(self, keep: VertexSet) -> "PartitionedGraph":
        """Subgraph on ``keep`` with the original vertex ids (removed vertices become isolated)."""
        adj = [row & keep if keep >> v & 1 else 0 for v, row in enumerate(self.adj)]
        return PartitionedGraph(self.n, adj, [p & keep for p in self.parts], strict=False,
                                meta=self.meta, check=False)

    def complement(self) -> "PartitionedGraph":
        everything = full(self.n)
        adj = [~row & everything & ~(1 << v) for v, row in enumerate(self.adj)]
        return PartitionedGraph(self.n, adj, self.parts, meta=self.meta, check=False)

    def with_edges(self, extra: Iterable[tuple[VertexSet, VertexSet]]) -> "PartitionedGraph":
        """Copy with every pair between each (X, Y) in ``extra`` joined (scratch overlay)."""
        adj = list(self.adj)
        for x, y in extra:
            if x & y:
                raise PreconditionViolated("overlay sides must be disjoint")
            for v in members(x):
                adj[v] |= y
            for v in members(y):
                adj[v] |= x
        return PartitionedGraph(self.n, adj, self.parts, meta=self.meta, check=False)

    def with_parts(self, parts: Sequence[int], *, strict: bool = False) -> "PartitionedGraph":
        g = PartitionedGraph(self.n, self.adj, parts, strict=False, meta=self.meta, check=False)
        g._matrix = self._matrix
        if strict:
            g.strict = True
            g._validate()
        return g

    def __repr__(self) -> str:
        return "PartitionedGraph(n=%d, m=%d, parts=%s)" % (
            self.n, self.num_edges(), [p.bit_count() for p in self.parts])

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, PartitionedGraph) and self.n == other.n and self.adj == other.adj
                and self.parts == other.parts)

    def __hash__(self) -> int:
        return hash((self.n, self.adj, self.parts))


def common_neighbors(G: PartitionedGraph, S: VertexSet | Iterable[int], target: VertexSet) -> VertexSet:
    """``target`` intersected with the neighbourhood of every vertex of ``S``.

    ``S`` may be a bitset or any iterable of vertices (repetitions are harmless).
    An empty ``S`` returns ``target`` unchanged.
    """
    out = target
    it = members(S) if isinstance(S, int) else S
    adj = G.adj
    for v in it:
        out &= adj[v]
        if not out:
            break
    return out


# ---------------------------------------------------------------- labellings

@dataclass(frozen=True)
class Labelling:
    """Bijection from vertices ``0..m-1`` to labels ``1..m``.

    ``order[v]`` is the label of vertex ``v``.  ``checked_d`` and
    ``checked_beta`` are only filled in by :func:`certify_labelling`.
    """

    order: tuple[int, ...]
    checked_d: int | None = None
    checked_beta: int | None = None
    _by_label: tuple[int, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        order = tuple(int(x) for x in self.order)
        m = len(order)
        by_label = [-1] * m
        for v, lab in enumerate(order):
            if not 1 <= lab <= m or by_label[lab - 1] != -1:
                raise PreconditionViolated("labelling is not a bijection onto [1..%d]" % m)
            by_label[lab - 1] = v
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "_by_label", tuple(by_label))

    @classmethod
    def from_sequence(cls, seq: Sequence[int]) -> "Labelling":
        """``seq[i]`` is the vertex receiving label ``i + 1``."""
        order = [0] * len(seq)
        for i, v in enumerate(seq):
            order[v] = i + 1
        return cls(tuple(order))

    @classmethod
    def identity(cls, m: int) -> "Labelling":
        return cls(tuple(range(1, m + 1)))

    @property
    def m(self) -> int:
        return len(self.order)

    def vertex(self, label: int) -> int:
        return self._by_label[label - 1]

    @property
    def sequence(self) -> tuple[int, ...]:
        """Vertices in label order."""
        return self._by_label

    def __getitem__(self, v: int) -> int:
        return self.order[v]


@dataclass(frozen=True)
class LabellingReport:
    degenerate_ok: bool
    local_ok: bool
    worst_back_degree: int
    worst_stretch: int

    @property
    def ok(self) -> bool:
        return self.degenerate_ok and self.local_ok


def verify_labelling(H: PartitionedGraph, lab: Labelling, d: int, beta: int) -> LabellingReport:
    if lab.m != H.n:
        raise PreconditionViolated("labelling covers %d vertices, graph has %d" % (lab.m, H.n))
    back = [0] * H.n
    stretch = 0
    order = lab.order
    for u, v in H.edges():
        gap = order[u] - order[v]
        if gap > 0:
            back[u] += 1
        else:
            back[v] += 1
            gap = -gap
        stretch = max(stretch, gap)
    worst = max(back, default=0)
    return LabellingReport(worst <= d, stretch <= beta, worst, stretch)


def certify_labelling(H: PartitionedGraph, lab: Labelling, d: int, beta: int) -> Labelling:
    """Return ``lab`` with its checked fields set, or raise if the bounds fail."""
    rep = verify_labelling(H, lab, d, beta)
    if not rep.ok:
        raise PreconditionViolated("labelling fails (d=%d, beta=%d): %r" % (d, beta, rep))
    return replace(lab, checked_d=d, checked_beta=beta)


def degeneracy_ordering(G: PartitionedGraph) -> tuple[Labelling, int]:
    """Min-degree peeling, lowest id on ties, emitted in reverse removal order."""
    n = G.n
    deg = [row.bit_count() for row in G.adj]
    heap = [(deg[v], v) for v in range(n)]
    heapq.heapify(heap)
    alive = full(n)
    removal: list[int] = []
    worst = 0
    while heap:
        dv, v = heapq.heappop(heap)
        if not alive >> v & 1 or dv != deg[v]:
            continue
        worst = max(worst, dv)
        removal.append(v)
        alive &= ~(1 << v)
        for u in members(G.adj[v] & alive):
            deg[u] -= 1
            heapq.heappush(heap, (deg[u], u))
    return Labelling.from_sequence(removal[::-1]), worst


# ---------------------------------------------------------------- JSON I/O

@dataclass
class GraphDocument:
    graph: PartitionedGraph
    labelling: Labelling | None = None
    extra: dict = field(default_factory=dict)


def graph_to_json(G: PartitionedGraph, labelling: Labelling | None = None, **extra) -> dict:
    doc: dict = {"n": G.n, "edges": [[u, v] for u, v in G.edges()]}
    if G.parts:
        doc["parts"] = [members(p) for p in G.parts]
    if labelling is not None:
        doc["labelling"] = list(labelling.order)
    doc.update(extra)
    return doc


def graph_from_json(doc: dict, *, strict: bool = False) -> GraphDocument:
    n = int(doc["n"])
    seen: set[tuple[int, int]] = set()
    edges = []
    for e in doc.get("edges", []):
        u, v = int(e[0]), int(e[1])
        if u == v:
            raise PreconditionViolated("self-loop edge (%d, %d)" % (u, v))
        if not (0 <= u < n and 0 <= v < n):
            raise PreconditionViolated("edge (%d, %d) outside [0, %d)" % (u, v, n))
        key = (min(u, v), max(u, v))
        if key in seen:
            raise PreconditionViolated("duplicate edge (%d, %d)" % key)
        seen.add(key)
        edges.append(key)
    parts = doc.get("parts")
    G = PartitionedGraph.from_edges(n, edges, parts, strict=strict)
    lab = Labelling(tuple(doc["labelling"])) if doc.get("labelling") is not None else None
    extra = {k: v for k, v in doc.items() if k not in ("n", "edges", "parts", "labelling")}
    return GraphDocument(G, lab, extra)


def read_graph(path: str | Path, *, strict: bool = False) -> GraphDocument:
    with open(path) as fh:
        return graph_from_json(json.load(fh), strict=strict)


def write_graph(path: str | Path, G: PartitionedGraph, labelling: Labelling | None = None, **extra) -> None:
    with open(path, "w") as fh:
        json.dump(graph_to_json(G, labelling, **extra), fh)
