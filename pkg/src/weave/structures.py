"""Block structures on the host side and colourings on the H side.

Host side: the B_k^r and P_k^r patterns, backbones (a k x (r+1) grid of
parts whose reduced graph contains B_k^r plus a complete row), backbone
extraction from a supplied partition, the path-power to backbone slicing,
monochromatic path-power search and the counting-lemma greedy.

H side: the transposition recolouring of one interval and the balanced
block colouring built from it, plus the Ramsey pipeline tying both sides
together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .config import budget as _budget, child_seed, make_rng
from .density import REFUTED, check_dense_pair, pair_density, reduced_graph
from .errors import (BackboneNotFound, BalancingFailed, BudgetExceeded, PipelineFailed, PreconditionViolated,
                     WeaveError)
from .graph import Labelling, PartitionedGraph, VertexSet, common_neighbors, members, verify_labelling, vset
from .potentials import CrossingFamily, clique_members, crossing_adjacent, is_crossing_clique, is_heavy


# ---------------------------------------------------------------- patterns

def make_Bkr(k: int, r: int) -> PartitionedGraph:
    """Vertex (i, j) is ``i*r + j``; (i, j) ~ (i', j') iff |i - i'| <= 1 and j != j'.
    Parts are the r columns."""
    if k < 1 or r < 1:
        raise PreconditionViolated("k and r must be positive")
    edges = []
    for a in range(k * r):
        i, j = divmod(a, r)
        for b in range(a + 1, k * r):
            i2, j2 = divmod(b, r)
            if abs(i - i2) <= 1 and j != j2:
                edges.append((a, b))
    cols = [[i * r + j for i in range(k)] for j in range(r)]
    return PartitionedGraph.from_edges(k * r, edges, cols, strict=True, meta={"pattern": "B", "k": k, "r": r})


def make_Pkr(k: int, r: int) -> PartitionedGraph:
    """r-th power of the path 0, 1, ..., k-1."""
    if k < 1 or r < 1:
        raise PreconditionViolated("k and r must be positive")
    edges = [(i, j) for i in range(k) for j in range(i + 1, min(k, i + r + 1))]
    return PartitionedGraph.from_edges(k, edges, meta={"pattern": "P", "k": k, "r": r})


def bkr_edge_count(k: int, r: int) -> int:
    return k * math.comb(r, 2) + (k - 1) * r * (r - 1)


# ---------------------------------------------------------------- backbones

@dataclass
class Backbone:
    parts: tuple[tuple[VertexSet, ...], ...]  # parts[i][j] = V_{i,j}; the last column is the special one
    eps: float
    delta: float
    certificate: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.parts)

    @property
    def columns(self) -> int:
        return len(self.parts[0]) if self.parts else 0

    def sizes(self) -> list[list[int]]:
        return [[p.bit_count() for p in row] for row in self.parts]

    def to_json(self) -> dict:
        return {"parts": [[members(p) for p in row] for row in self.parts], "eps": self.eps, "delta": self.delta,
                "sizes": self.sizes(), "certificate": self.certificate, "meta": self.meta}

    @classmethod
    def from_json(cls, doc: dict) -> "Backbone":
        parts = tuple(tuple(vset(p) for p in row) for row in doc["parts"])
        return cls(parts, doc["eps"], doc["delta"], doc.get("certificate", {}), doc.get("meta", {}))


def backbone_pairs(k: int, c: int, *, full_grid: bool = False) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Pairs of grid cells that must be dense.

    Always: B_k^{c-1} on the first c-1 columns and a complete row over all c
    columns.  With ``full_grid`` the pattern is B_k^c over all columns, which
    is what the path-power slicing produces.
    """
    cols = c if full_grid else c - 1
    out = []
    for a in range(k * c):
        i, j = divmod(a, c)
        for b in range(a + 1, k * c):
            i2, j2 = divmod(b, c)
            if j == j2:
                continue
            in_pattern = j < cols and j2 < cols and abs(i - i2) <= 1
            in_row = i == i2
            if in_pattern or in_row:
                out.append(((i, j), (i2, j2)))
    return out


def certify_backbone(G: PartitionedGraph, parts: Sequence[Sequence[VertexSet]], eps: float, delta: float,
                     mode=("sampled", 2000, 0), *, full_grid: bool = False) -> dict:
    """Dense-pair verdict for every pair the backbone needs; ``ok`` is False if any pair is refuted."""
    k, c = len(parts), len(parts[0]) if parts else 0
    verdicts = {}
    ok = True
    for n_pair, ((i, j), (i2, j2)) in enumerate(backbone_pairs(k, c, full_grid=full_grid)):
        X, Y = parts[i][j], parts[i2][j2]
        if not X or not Y:
            verdicts["%d,%d|%d,%d" % (i, j, i2, j2)] = {"status": REFUTED, "reason": "empty part"}
            ok = False
            continue
        m = mode if isinstance(mode, str) else (mode[0], mode[1], child_seed(mode[2], n_pair))
        v = check_dense_pair(G, X, Y, eps, delta, m)
        verdicts["%d,%d|%d,%d" % (i, j, i2, j2)] = {"status": v.status, "density": pair_density(G, X, Y)}
        ok = ok and not v.refuted
    return {"ok": ok, "eps": eps, "delta": delta, "pairs": verdicts, "full_grid": full_grid}


def _relative_min_degree(G: PartitionedGraph) -> float:
    if G.n <= 1:
        return 1.0
    return min(row.bit_count() for row in G.adj) / G.n


def _grid_search(R: PartitionedGraph, r: int, seed: int, node_budget: int, exhaustive: bool):
    """Longest sequence of rows (ordered r-cliques of R) with consecutive rows joined
    whenever the columns differ.  Returns (rows, exhausted_search)."""
    n = R.n
    adj = R.adj
    best: list[tuple[int, ...]] = []
    nodes = 0
    cap = n // r
    rng = make_rng(seed, 0xBB)

    def row_options(used: int, prev: tuple[int, ...] | None, order: list[int]):
        # ordered r-cliques avoiding ``used`` and fitting under ``prev``
        def grow(row: list[int], cand: int):
            if len(row) == r:
                yield tuple(row)
                return
            j = len(row)
            allowed = cand
            if prev is not None:
                for jj, u in enumerate(prev):
                    if jj != j:
                        allowed &= adj[u]
            for v in order:
                if allowed >> v & 1:
                    row.append(v)
                    yield from grow(row, cand & adj[v] & ~(1 << v))
                    row.pop()
        yield from grow([], full_mask & ~used)

    full_mask = (1 << n) - 1

    def dfs(rows: list[tuple[int, ...]], used: int, order: list[int]) -> bool:
        nonlocal best, nodes
        nodes += 1
        if nodes > node_budget:
            return True
        if len(rows) > len(best):
            best = list(rows)
            if len(best) == cap:
                return True
        if len(rows) + (n - used.bit_count()) // r <= len(best):
            return False
        for row in row_options(used, rows[-1] if rows else None, order):
            rows.append(row)
            stop = dfs(rows, used | vset(row), order)
            rows.pop()
            if stop:
                return True
        return False

    if exhaustive:
        dfs([], 0, list(range(n)))
        return best, nodes <= node_budget and len(best) <= cap
    restarts = 20
    per = max(1, node_budget // restarts)
    for _ in range(restarts):
        order = [int(v) for v in rng.permutation(n)]
        nodes = 0
        saved = node_budget
        node_budget = per
        dfs([], 0, order)
        node_budget = saved
        if len(best) == cap:
            break
    return best, False


def find_backbone_min_degree(G: PartitionedGraph, r: int, eps: float, delta: float, t0: int,
                             partition: Sequence[VertexSet] | None = None, seed: int = 0, *,
                             mode=("sampled", 300, 0), check_degree: bool = True,
                             node_budget: int = 200_000, reservoir_frac: float | None = None) -> Backbone:
    """Backbone with k >= t0 rows and r+1 columns from a supplied partition.

    The reduced graph over the partition is searched for B_k^r; each row then
    gets a reservoir part adjacent to the whole row (each part serves at most
    floor(1/delta) rows), from which a slice of ceil(frac * |V_a|) vertices
    becomes the row's extra column; ``reservoir_frac`` defaults to delta*eps/2.
    """
    parts = list(G.parts if partition is None else partition)
    if len(parts) < r or r < 1:
        raise PreconditionViolated("need at least r parts")
    if check_degree:
        need = 1 - 1 / r + 2 * delta
        rel = _relative_min_degree(G)
        if rel < need - 1e-12:
            raise PreconditionViolated("relative minimum degree %.3f below 1 - 1/r + 2 delta = %.3f" % (rel, need))
    R = reduced_graph(G, parts, eps, delta, mode)
    exhaustive = len(parts) <= 20
    grid, exhausted = _grid_search(R, r, seed, node_budget, exhaustive)
    if len(grid) < t0:
        raise BackboneNotFound("longest row sequence has %d rows, need %d" % (len(grid), t0),
                               rows=len(grid), exhaustive=exhausted)
    k = len(grid)
    cap = max(1, math.floor(1 / delta + 1e-12))
    cells = [(i, j) for i in range(k) for j in range(r)]
    load = {cell: 0 for cell in cells}
    assign = []
    for i in range(k):
        row = grid[i]
        ok = [cell for cell in cells if cell[0] != i and load[cell] < cap
              and all(R.has_edge(grid[cell[0]][cell[1]], v) for v in row)]
        if not ok:
            raise BackboneNotFound("row %d has no admissible reservoir part" % i, row=i)
        pick = min(ok, key=lambda cell: (load[cell], cell))
        load[pick] += 1
        assign.append(pick)
    U = [[parts[grid[i][j]] for j in range(r)] for i in range(k)]
    reservoirs = []
    for i, (ai, aj) in enumerate(assign):
        src = parts[grid[ai][aj]]
        frac = delta * eps / 2 if reservoir_frac is None else reservoir_frac
        size = math.ceil(frac * src.bit_count() - 1e-12)
        avail = members(U[ai][aj])
        if size > len(avail):
            raise BackboneNotFound("reservoir part of row %d is exhausted" % i, row=i)
        take = vset(avail[len(avail) - size:])
        U[ai][aj] &= ~take
        reservoirs.append(take)
    rows = tuple(tuple(U[i]) + (reservoirs[i],) for i in range(k))
    cert = certify_backbone(G, rows, eps, delta, mode)
    n = G.n
    floor_size = (1 - eps) * n / (k * r)
    cert["size_floor"] = floor_size
    cert["sizes_ok"] = all(rows[i][j].bit_count() >= floor_size - 1e-9 for i in range(k) for j in range(r))
    meta = {"grid": [list(g) for g in grid], "reservoir_of": [list(a) for a in assign], "cap": cap,
            "exhaustive": exhausted, "reduced_edges": R.num_edges()}
    return Backbone(rows, eps, delta, cert, meta)


def path_power_to_backbone(G: PartitionedGraph | None, parts: Sequence[VertexSet], r: int, *, eps: float = 0.0,
                           delta: float = 0.0, mode=("sampled", 2000, 0), certify: bool = True) -> Backbone:
    """Slice parts V_0..V_{k-1} (in path-power order) into U_{i,j}, i < k - r, j <= r.

    U_{i,j} is slab ``a - i`` of V_a, where a is the element of [i, i+r+1)
    congruent to j mod r+1.  Each part is cut into r+1 slabs of
    floor(|V_a| / (r+1)) vertices; the remainder stays unassigned.
    """
    k = len(parts)
    if r < 1 or k < r + 1:
        raise PreconditionViolated("need k >= r + 1 parts")
    c = r + 1
    slabs = []
    trimmed = []
    for V in parts:
        vs = members(V)
        w = len(vs) // c
        slabs.append([vset(vs[s * w:(s + 1) * w]) for s in range(c)])
        trimmed.append(len(vs) - w * c)
    rows = []
    source = []
    for i in range(k - r):
        row = []
        src = []
        for j in range(c):
            a = next(x for x in range(i, i + c) if x % c == j)
            row.append(slabs[a][a - i])
            src.append([a, a - i])
        rows.append(tuple(row))
        source.append(src)
    load: dict[int, int] = {}
    for src in source:
        for a, _ in src:
            load[a] = load.get(a, 0) + 1
    meta = {"source": source, "trimmed": trimmed, "rule": "floor slabs, remainder unassigned",
            "max_multiplicity": max(load.values())}
    cert = {}
    if certify and G is not None:
        cert = certify_backbone(G, rows, (r + 1) * eps, delta, mode, full_grid=True)
    return Backbone(tuple(rows), (r + 1) * eps, delta, cert, meta)


# ---------------------------------------------------------------- monochromatic path powers

def _is_power_sequence(adj: Sequence[int], seq: Sequence[int], r: int) -> bool:
    return all(adj[seq[i]] >> seq[j] & 1 for i in range(len(seq)) for j in range(i + 1, min(len(seq), i + r + 1)))


def _longest_power(adj: Sequence[int], n: int, r: int, node_budget: int, order: Sequence[int]) -> tuple[list[int], bool]:
    best: list[int] = []
    nodes = 0
    everything = (1 << n) - 1

    def dfs(seq: list[int], used: int, cand: int) -> bool:
        nonlocal best, nodes
        nodes += 1
        if nodes > node_budget:
            return True
        if len(seq) > len(best):
            best = list(seq)
            if len(best) == n:
                return True
        if len(seq) + (n - used.bit_count()) <= len(best):
            return False
        for v in order:
            if cand >> v & 1:
                seq.append(v)
                nxt = everything & ~(used | 1 << v)
                for u in seq[-r:]:
                    nxt &= adj[u]
                if dfs(seq, used | 1 << v, nxt):
                    return True
                seq.pop()
        return False

    dfs([], 0, everything)
    return best, nodes <= node_budget


def _greedy_power(adj: Sequence[int], n: int, r: int, rng) -> list[int]:
    everything = (1 << n) - 1
    start = int(rng.integers(n)) if n else 0
    seq = [start] if n else []
    used = 1 << start if n else 0
    while True:
        cand = everything & ~used
        for u in seq[-r:]:
            cand &= adj[u]
        if not cand:
            return seq

        def room(v: int) -> int:
            c = everything & ~(used | 1 << v)
            for u in (seq + [v])[-r:]:
                c &= adj[u]
            return c.bit_count()

        opts = members(cand)
        scores = [room(v) for v in opts]
        top = max(scores)
        ties = [v for v, s in zip(opts, scores) if s == top]
        v = ties[int(rng.integers(len(ties)))]
        seq.append(v)
        used |= 1 << v


def find_mono_path_power(red: PartitionedGraph, blue: PartitionedGraph, r: int, *, seed: int = 0,
                         node_budget: int = 500_000, restarts: int = 64) -> tuple[str, tuple[int, ...], dict]:
    """Longest monochromatic r-th path power found in either colour.

    Exhaustive (within ``node_budget``) when there are at most 16 vertices,
    greedy longest-extension with restarts otherwise.  Red wins ties.
    """
    n = red.n
    if blue.n != n:
        raise PreconditionViolated("colour graphs disagree on the vertex count")
    report = {"n": n, "floor": n // (2 * r + 3)}
    found = {}
    for colour, Gc in (("red", red), ("blue", blue)):
        if n <= 16:
            seq, complete = _longest_power(Gc.adj, n, r, node_budget, list(range(n)))
            found[colour] = (seq, complete)
        else:
            rng = make_rng(seed, 0x9A, 0 if colour == "red" else 1)
            best: list[int] = []
            for _ in range(restarts):
                s = _greedy_power(Gc.adj, n, r, rng)
                if len(s) > len(best):
                    best = s
            found[colour] = (best, False)
    colour = "red" if len(found["red"][0]) >= len(found["blue"][0]) else "blue"
    seq = tuple(found[colour][0]) or ((0,) if n else ())
    adj = (red if colour == "red" else blue).adj
    if not _is_power_sequence(adj, seq, r):
        raise WeaveError("search returned a sequence that is not a path power")
    report.update({"k": len(seq), "colour": colour, "meets_floor": len(seq) >= report["floor"],
                   "exhaustive": bool(found[colour][1]),
                   "lengths": {c: len(v[0]) for c, v in found.items()}})
    return colour, seq, report


# ---------------------------------------------------------------- counting-lemma greedy

def find_adjacent_heavy_cliques(G: PartitionedGraph, parts: Sequence[VertexSet], K: Sequence[int],
                                delta_prime: float, delta: float, *, budget: int | None = None) -> CrossingFamily:
    """Crossing cliques adjacent to the seed clique K, built one vertex per part.

    W_i is the common neighbourhood of K minus its i-th vertex inside V_i.
    Step t picks w_t from W_t^(t-1) among the vertices keeping at least a
    delta fraction of every other W_i^(t-1); every completed clique is kept
    when it is delta^r-heavy and adjacent to K.
    """
    r = len(parts)
    if len(K) != r or not is_crossing_clique(G, K, parts):
        raise PreconditionViolated("K must be a clique with one vertex in each part")
    if not is_heavy(G, K, parts, delta_prime):
        raise PreconditionViolated("seed clique is not %.4g-heavy" % delta_prime)
    cap = _budget(budget)
    adj = G.adj
    W = [common_neighbors(G, [v for j, v in enumerate(K) if j != i], parts[i]) for i in range(r)]
    out: list[tuple[int, ...]] = []
    visited = 0
    heavy_delta = delta ** r

    def grow(t: int, cur: list[VertexSet], picked: list[int]) -> None:
        nonlocal visited
        if t == r:
            clique = tuple(picked)
            if is_heavy(G, clique, parts, heavy_delta) and crossing_adjacent(G, [(v,) for v in clique],
                                                                            [(v,) for v in K]):
                out.append(clique)
            return
        for w in members(cur[t]):
            visited += 1
            if visited > cap:
                raise BudgetExceeded("counting greedy visited more than %d vertices" % cap)
            nxt = [c & adj[w] if i != t else c for i, c in enumerate(cur)]
            if all(nxt[i].bit_count() >= delta * cur[i].bit_count() - 1e-12 for i in range(r) if i != t):
                picked.append(w)
                grow(t + 1, nxt, picked)
                picked.pop()

    grow(0, list(W), [])
    fam = CrossingFamily("K", tuple(parts), clique_members(out), exhaustive=True)
    return fam


def counting_bound(parts: Sequence[VertexSet], delta_prime: float, delta: float) -> float:
    r = len(parts)
    return delta_prime ** r * delta ** (r * r) * math.prod(p.bit_count() for p in parts)


def exhaustive_adjacent_heavy(G: PartitionedGraph, parts: Sequence[VertexSet], K: Sequence[int],
                              delta: float) -> int:
    """Reference count: every crossing clique that is delta^r-heavy and adjacent to K."""
    from itertools import product
    r = len(parts)
    count = 0
    for clique in product(*(members(p) for p in parts)):
        if not is_crossing_clique(G, clique, parts):
            continue
        if is_heavy(G, clique, parts, delta ** r) and crossing_adjacent(G, [(v,) for v in clique],
                                                                        [(v,) for v in K]):
            count += 1
    return count


# ---------------------------------------------------------------- recolouring

def bubble_transpositions(perm: Sequence[int]) -> list[tuple[int, int]]:
    """Adjacent transpositions (p, p+1), in application order, that carry the identity
    arrangement to ``perm`` (position j ends up holding perm[j])."""
    arr = list(range(len(perm)))
    if sorted(perm) != arr:
        raise PreconditionViolated("%r is not a permutation" % (list(perm),))
    out = []
    for i, want in enumerate(perm):
        q = arr.index(want)
        while q > i:
            arr[q - 1], arr[q] = arr[q], arr[q - 1]
            out.append((q - 1, q))
            q -= 1
    return out


def _span_vertices(lab: Labelling, lo: int, hi: int) -> list[int]:
    return [lab.vertex(label) for label in range(lo + 1, hi + 1)]


def recolor(H: PartitionedGraph, lab: Labelling, coloring: Sequence[int], perm: Sequence[int], *, beta: int,
            eps: float, span: tuple[int, int] | None = None) -> tuple[int, ...]:
    """Recolour the labels in ``span`` (default all) with colours 0..r, r = len(perm).

    After the steps for each transposition the interior class j consists of
    what was originally class perm[j]; colour r collects the vertices moved
    out of the way, and labels within 3*beta of either end keep their colour.
    """
    r = len(perm)
    lo, hi = span if span is not None else (0, H.n)
    m = hi - lo
    if r < 2:
        raise PreconditionViolated("recolouring needs r >= 2")
    if eps * m < 3 * r * r * beta - 1e-9:
        raise PreconditionViolated("eps*m = %.1f is below 3 r^2 beta = %d" % (eps * m, 3 * r * r * beta))
    col = list(coloring)
    verts = _span_vertices(lab, lo, hi)
    inside = set(verts)
    for v in verts:
        if not 0 <= col[v] < r:
            raise PreconditionViolated("vertex %d has colour %d outside [0, %d)" % (v, col[v], r))
    for u, v in H.edges():
        if u in inside and v in inside:
            if col[u] == col[v]:
                raise PreconditionViolated("colouring is not proper on the interval")
            if abs(lab[u] - lab[v]) > beta:
                raise PreconditionViolated("labelling is not %d-local on the interval" % beta)
    special = r
    pos = {v: lab[v] - lo for v in verts}
    for step, (a, b) in enumerate(bubble_transpositions(perm), start=1):
        new = dict((v, col[v]) for v in verts)
        for v in verts:
            p, c = pos[v], col[v]
            if c == a:
                if 3 * step * beta < p <= (3 * step + 2) * beta or m - (3 * step + 2) * beta < p <= m - 3 * step * beta:
                    new[v] = special
                elif (3 * step + 2) * beta < p <= m - (3 * step + 2) * beta:
                    new[v] = b
            elif c == b and (3 * step + 1) * beta < p <= m - (3 * step + 1) * beta:
                new[v] = a
        for v in verts:
            col[v] = new[v]
    return tuple(col)


def recolor_report(H: PartitionedGraph, lab: Labelling, before: Sequence[int], after: Sequence[int],
                   perm: Sequence[int], *, beta: int, eps: float, span: tuple[int, int] | None = None) -> dict:
    """Direct checks of the recolouring guarantees on one interval."""
    r = len(perm)
    lo, hi = span if span is not None else (0, H.n)
    m = hi - lo
    verts = _span_vertices(lab, lo, hi)
    inside = set(verts)
    proper = all(after[u] != after[v] for u, v in H.edges() if u in inside and v in inside)
    ends = [v for v in verts if lab[v] - lo <= beta or lab[v] - lo > m - beta]
    keeps_ends = all(after[v] == before[v] for v in ends)
    W = [sum(1 for v in verts if before[v] == j) for j in range(r)]
    U = [sum(1 for v in verts if after[v] == j) for j in range(r + 1)]
    sizes_ok = all(abs(U[j] - W[perm[j]]) <= eps * m + 1e-9 for j in range(r))
    t = len(bubble_transpositions(perm))
    return {"proper": proper, "i": keeps_ends, "ii": sizes_ok, "iii": U[r] <= eps * m + 1e-9,
            "special": U[r], "special_bound": 2 * (3 * t + 2) * beta, "within_bound": U[r] <= 2 * (3 * t + 2) * beta,
            "W": W, "U": U, "transpositions": t}


@dataclass
class BlockColoring:
    coloring: tuple[int, ...]  # per H vertex, colours 0..colors-1; the last colour is the special one
    blocks: list[tuple[int, int]]  # label ranges (lo, hi]
    colors: int
    buffer_ok: bool = True
    meta: dict = field(default_factory=dict)

    def block_of(self, lab: Labelling) -> list[int]:
        out = [0] * lab.m
        for b, (lo, hi) in enumerate(self.blocks):
            for label in range(lo + 1, hi + 1):
                out[lab.vertex(label)] = b
        return out

    def class_sizes(self, lab: Labelling) -> list[list[int]]:
        sizes = [[0] * self.colors for _ in self.blocks]
        for v, b in enumerate(self.block_of(lab)):
            sizes[b][self.coloring[v]] += 1
        return sizes

    def problems(self, H: PartitionedGraph, lab: Labelling, beta: int) -> list[str]:
        """Contract used by the backbone pipeline: proper colouring, contiguous blocks
        covering every label, special colour at least beta+1 labels inside its block."""
        out = []
        if len(self.coloring) != H.n:
            out.append("colouring has %d entries for %d vertices" % (len(self.coloring), H.n))
            return out
        if any(not 0 <= c < self.colors for c in self.coloring):
            out.append("colour outside range")
        if any(self.coloring[u] == self.coloring[v] for u, v in H.edges()):
            out.append("colouring is not proper")
        edge = 0
        for lo, hi in self.blocks:
            if lo != edge or hi <= lo:
                out.append("blocks are not contiguous at label %d" % lo)
                break
            edge = hi
        if edge != H.n:
            out.append("blocks cover %d of %d labels" % (edge, H.n))
            return out
        special = self.colors - 1
        for lo, hi in self.blocks:
            for label in range(lo + 1, hi + 1):
                if self.coloring[lab.vertex(label)] == special and not lo + beta < label <= hi - beta:
                    out.append("special colour at label %d is within %d of its block edge" % (label, beta))
                    break
        return out

    def to_json(self) -> dict:
        return {"coloring": list(self.coloring), "blocks": [list(b) for b in self.blocks], "colors": self.colors,
                "buffer_ok": self.buffer_ok, "meta": self.meta}


def _intervals(lo: int, hi: int, length: int) -> list[tuple[int, int]]:
    return [(a, min(a + length, hi)) for a in range(lo, hi, length)]


def lemma_h_report(H: PartitionedGraph, lab: Labelling, coloring: Sequence[int], blocks: Sequence[tuple[int, int]],
                   r: int, eps: float, buffer: int) -> dict:
    """Exact checks of the balanced block colouring: class sizes per block,
    special-class size per block, no special vertex near a block edge, properness."""
    m = H.n
    k = len(blocks)
    xi = m / k if k else 0.0
    sizes = [[0] * (r + 1) for _ in blocks]
    block_of = [0] * m
    for b, (lo, hi) in enumerate(blocks):
        for label in range(lo + 1, hi + 1):
            v = lab.vertex(label)
            block_of[v] = b
            sizes[b][coloring[v]] += 1
    cond_i = all(sizes[b][j] <= (1 + eps) * xi / r + 1e-9 for b in range(k) for j in range(r))
    cond_ii = all(sizes[b][r] <= eps * xi / r + 1e-9 for b in range(k))
    edges = sorted({lo for lo, _ in blocks} | {hi for _, hi in blocks})
    cond_iii = True
    for v in range(m):
        if coloring[v] == r and any(e - buffer < lab[v] <= e + buffer for e in edges):
            cond_iii = False
            break
    proper = all(coloring[u] != coloring[v] for u, v in H.edges())
    return {"i": cond_i, "ii": cond_ii, "iii": cond_iii, "proper": proper, "sizes": sizes, "xi": xi,
            "ok": cond_i and cond_ii and cond_iii and proper}


def balanced_recolor(H: PartitionedGraph, lab: Labelling, coloring: Sequence[int], k: int, eps: float, seed: int,
                     trials: int, *, beta: int, sub_len: int | None = None, recolor_eps: float | None = None,
                     r: int | None = None) -> BlockColoring:
    """Balanced (r+1)-colouring for k blocks of about m/k labels.

    Each block is cut into sub-intervals of ``sub_len`` labels; each
    sub-interval gets a random permutation of the colours, and a draw is kept
    once every permuted class total in the block is at most (1 + eps/2) xi/r.
    The permutations are then realised by ``recolor`` with ``recolor_eps`` and
    the block is accepted only if the exact block conditions hold.
    ``beta`` is the locality of ``lab``; it is also the buffer kept free of
    the special colour around block edges.
    """
    m = H.n
    if k < 1:
        raise PreconditionViolated("k must be positive")
    if m == 0:
        return BlockColoring((), [], (r or 1) + 1, True, {"k": k})
    rep = verify_labelling(H, lab, m, beta)
    if not rep.local_ok:
        raise PreconditionViolated("labelling is not %d-local" % beta)
    r = (max(coloring) + 1) if r is None else r
    if any(coloring[u] == coloring[v] for u, v in H.edges()) or any(not 0 <= c < r for c in coloring):
        raise PreconditionViolated("input colouring is not a proper %d-colouring" % r)
    recolor_eps = eps / 4 if recolor_eps is None else recolor_eps
    if sub_len is None:
        sub_len = max(1, math.ceil(3 * r * r * beta / recolor_eps)) if r >= 2 else m
    xi_len = math.ceil(m / k)
    blocks = _intervals(0, m, xi_len)
    xi = m / k
    col = list(coloring)
    report = {"k": k, "xi": xi, "sub_len": sub_len, "recolor_eps": recolor_eps, "rule": "last block and last "
              "sub-interval may be short; sub-intervals too short to recolour keep the identity", "blocks": []}
    for b, (lo, hi) in enumerate(blocks):
        subs = _intervals(lo, hi, sub_len)
        counts = []
        for slo, shi in subs:
            c = [0] * r
            for v in _span_vertices(lab, slo, shi):
                c[coloring[v]] += 1
            counts.append(c)
        usable = [r >= 2 and recolor_eps * (shi - slo) >= 3 * r * r * beta - 1e-9 for slo, shi in subs]
        best = None
        accepted = None
        for trial in range(trials):
            rng = make_rng(seed, 0xBA1, b, trial)
            perms = [tuple(int(x) for x in rng.permutation(r)) if use else tuple(range(r))
                     for use in usable]
            xi_hat = [sum(counts[s][perms[s][j]] for s in range(len(subs))) for j in range(r)]
            worst = max(xi_hat)
            if best is None or worst < best[1]:
                best = (perms, worst)
            if worst > (1 + eps / 2) * xi / r + 1e-9:
                continue
            trial_col = list(col)
            for (slo, shi), perm, use in zip(subs, perms, usable):
                if use and perm != tuple(range(r)):
                    trial_col = list(recolor(H, lab, trial_col, perm, beta=beta, eps=recolor_eps, span=(slo, shi)))
            sizes = [0] * (r + 1)
            for v in _span_vertices(lab, lo, hi):
                sizes[trial_col[v]] += 1
            if all(sizes[j] <= (1 + eps) * xi / r + 1e-9 for j in range(r)) and sizes[r] <= eps * xi / r + 1e-9:
                accepted = (trial, perms, xi_hat, trial_col)
                break
        if accepted is None:
            raise BalancingFailed("block %d: no balanced permutation tuple in %d trials" % (b, trials), block=b,
                                  best=[list(p) for p in best[0]] if best else None,
                                  worst=best[1] if best else None, bound=(1 + eps / 2) * xi / r)
        trial, perms, xi_hat, col = accepted
        report["blocks"].append({"block": b, "trial": trial, "perms": [list(p) for p in perms], "xi_hat": xi_hat})
    final = lemma_h_report(H, lab, col, blocks, r, eps, beta)
    if not final["ok"]:
        raise BalancingFailed("assembled colouring fails the block conditions", report=final)
    report["check"] = {k_: v for k_, v in final.items() if k_ != "sizes"}
    return BlockColoring(tuple(col), blocks, r + 1, final["iii"], report)


# ---------------------------------------------------------------- Ramsey pipeline

@dataclass
class RamseyParams:
    r: int = 2  # chromatic number of H
    d: int = 2
    beta: int = 3  # locality of the supplied labelling
    eps: float = 0.5  # block balance slack
    blocks: int | None = None  # number of H blocks (default: every backbone row)
    sub_len: int | None = None
    recolor_eps: float | None = None
    trials: int = 200
    majority: float = 0.5
    search_budget: int = 500_000
    embed_eps: float = 0.0
    pipeline: dict = field(default_factory=dict)  # PipelineParams overrides
    seed: int = 0

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _stage(stage: str, exc: WeaveError) -> PipelineFailed:
    return PipelineFailed("stage %s failed: %s: %s" % (stage, type(exc).__name__, exc), stage=stage,
                          cause=type(exc).__name__, details=getattr(exc, "details", {}))


def coloured_reduced_graph(red: PartitionedGraph, parts: Sequence[VertexSet],
                           majority: float = 0.5) -> tuple[PartitionedGraph, PartitionedGraph, dict]:
    """Pair (i, j) is red when the red density between the parts is at least ``majority``."""
    t = len(parts)
    red_e, blue_e, dens = [], [], {}
    for i in range(t):
        for j in range(i + 1, t):
            dn = pair_density(red, parts[i], parts[j])
            dens["%d,%d" % (i, j)] = dn
            (red_e if dn >= majority else blue_e).append((i, j))
    return PartitionedGraph.from_edges(t, red_e), PartitionedGraph.from_edges(t, blue_e), dens


def ramsey_pipeline(red: PartitionedGraph, H: PartitionedGraph, lab: Labelling, coloring: Sequence[int],
                    params: RamseyParams, *, partition: Sequence[VertexSet] | None = None):
    """Monochromatic copy of H in the two-colouring of K_n whose red edges are ``red``.

    Returns (embedding, colour, report).  Every stage failure is re-raised
    as PipelineFailed carrying the stage name.
    """
    from .embedder import PipelineParams, embed_via_backbone, verify_embedding
    from .drc import DrcParams

    parts = list(red.parts if partition is None else partition)
    report: dict = {"params": params.to_json(), "n": red.n, "parts": len(parts)}
    r = params.r
    if len(parts) < r + 1:
        raise _stage("partition", PreconditionViolated("need at least r + 1 parts"))
    Rr, Rb, dens = coloured_reduced_graph(red, parts, params.majority)
    report["reduced"] = {"red_edges": Rr.num_edges(), "blue_edges": Rb.num_edges()}
    colour, seq, found = find_mono_path_power(Rr, Rb, r, seed=params.seed, node_budget=params.search_budget)
    report["path_power"] = found | {"sequence": list(seq)}
    if len(seq) < r + 1:
        raise _stage("path_power", PreconditionViolated("monochromatic path power has only %d parts" % len(seq)))
    host = red if colour == "red" else red.complement()
    bb = path_power_to_backbone(host, [parts[i] for i in seq], r, certify=False)
    report["backbone"] = {"rows": bb.k, "columns": bb.columns, "sizes": bb.sizes(), "meta": bb.meta}
    k_blocks = params.blocks or bb.k
    try:
        bc = balanced_recolor(H, lab, coloring, k_blocks, params.eps, child_seed(params.seed, 0x8C), params.trials,
                              beta=params.beta, sub_len=params.sub_len, recolor_eps=params.recolor_eps, r=r)
    except WeaveError as exc:
        raise _stage("balanced_recolor", exc) from exc
    report["coloring"] = bc.meta
    overrides = dict(params.pipeline)
    drc = DrcParams.from_json(overrides.pop("drc", {"d": params.d}))
    pp = PipelineParams(d=params.d, beta=params.beta, drc=drc, seed=child_seed(params.seed, 0xE6), **overrides)
    try:
        f, log = embed_via_backbone(host, bb, H, lab, bc, pp, eps=params.embed_eps)
    except WeaveError as exc:
        raise _stage("embed", exc) from exc
    report["embed"] = {"steps": len(log["blocks"]), "audit_failures": log["audit_failures"]}
    ok, why = verify_embedding(host, H, f)
    audit = colour_audit(red, H, f.map, colour)
    report["verified"] = ok
    report["colour_audit"] = audit
    if not ok or audit is not None:
        raise _stage("verify", WeaveError("embedding check failed: %s" % (why or audit)))
    return f, colour, report


def colour_audit(red: PartitionedGraph, H: PartitionedGraph, mapping: dict, colour: str) -> str | None:
    """None when every H-edge lands on an edge of ``colour``; otherwise the first offender."""
    want_red = colour == "red"
    for u, v in H.edges():
        x, y = mapping[u], mapping[v]
        if x == y or red.has_edge(x, y) != want_red:
            return "edge (%d, %d) -> (%d, %d) is not %s" % (u, v, x, y, colour)
    return None
