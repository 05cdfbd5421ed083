"""Dense-pair and degree-dense predicates, relative degrees, reduced graphs.

Exact checks enumerate one side's subsets and pick the worst partner set
greedily, which is exact because the edge count between X' and a set of
fixed size is minimised by taking the lowest-degree vertices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .config import make_rng
from .errors import PreconditionViolated, SizeLimitExceeded
from .graph import PartitionedGraph, VertexSet, members, vset

CERTIFIED = "CERTIFIED"
REFUTED = "REFUTED"
UNFALSIFIED = "UNFALSIFIED"

EXACT_LIMIT = 24
_TOL = 1e-12


@dataclass
class DensityVerdict:
    status: str
    counterexample: tuple | None = None  # (X', Y', achieved value)
    trials: int = 0
    mode: str = "exact"

    @property
    def refuted(self) -> bool:
        return self.status == REFUTED

    def to_json(self) -> dict:
        ce = None
        if self.counterexample is not None:
            x, y, val = self.counterexample
            ce = {"x": list(x), "y": list(y), "value": val}
        return {"status": self.status, "counterexample": ce, "trials": self.trials, "mode": self.mode}


def _min_size(eps: float, size: int) -> int:
    return max(1, math.ceil(eps * size - _TOL))


def _parse_mode(mode) -> tuple[str, int, int]:
    if isinstance(mode, str):
        if mode == "exact":
            return "exact", 0, 0
        if mode == "sampled":
            return "sampled", 10_000, 0
        raise PreconditionViolated("unknown mode %r" % mode)
    kind, trials, seed = mode
    return kind, int(trials), int(seed)


def edge_count(G: PartitionedGraph, X: VertexSet, Y: VertexSet) -> int:
    return sum((G.adj[v] & Y).bit_count() for v in members(X))


# ---------------------------------------------------------------- dense pairs

def check_dense_pair(G: PartitionedGraph, X: VertexSet, Y: VertexSet, eps: float, delta: float,
                     mode="exact") -> DensityVerdict:
    if X & Y:
        raise PreconditionViolated("X and Y must be disjoint")
    if not X or not Y:
        raise PreconditionViolated("X and Y must be nonempty")
    kind, trials, seed = _parse_mode(mode)
    xs, ys = members(X), members(Y)
    kx, ky = _min_size(eps, len(xs)), _min_size(eps, len(ys))
    if kind == "exact":
        if len(xs) + len(ys) > EXACT_LIMIT:
            raise SizeLimitExceeded("exact dense-pair check is capped at %d vertices" % EXACT_LIMIT)
        # enumerate the smaller side, choose the partner greedily
        flip = len(ys) < len(xs)
        if flip:
            xs, ys, kx, ky = ys, xs, ky, kx
        for size in range(kx, len(xs) + 1):
            for sub in combinations(xs, size):
                sub_bits = vset(sub)
                degs = sorted(((G.adj[y] & sub_bits).bit_count(), y) for y in ys)
                total = 0
                for j, (dy, _) in enumerate(degs, start=1):
                    total += dy
                    if j >= ky and total < delta * size * j - _TOL:
                        partner = tuple(sorted(y for _, y in degs[:j]))
                        a, b = (partner, sub) if flip else (sub, partner)
                        return DensityVerdict(REFUTED, (a, b, total / (size * j)), 0, "exact")
        return DensityVerdict(CERTIFIED, None, 0, "exact")

    rng = make_rng(seed, 0xD5)
    M = G.matrix()[np.ix_(xs, ys)].astype(np.int64)
    nx, ny = len(xs), len(ys)
    for trial in range(trials):
        a = int(rng.integers(kx, nx + 1))
        b = int(rng.integers(ky, ny + 1))
        rx = rng.choice(nx, size=a, replace=False)
        ry = rng.choice(ny, size=b, replace=False)
        e = int(M[np.ix_(rx, ry)].sum())
        if e < delta * a * b - _TOL:
            sx = tuple(sorted(xs[i] for i in rx))
            sy = tuple(sorted(ys[j] for j in ry))
            # independent recount before reporting
            assert edge_count(G, vset(sx), vset(sy)) == e
            return DensityVerdict(REFUTED, (sx, sy, e / (a * b)), trial + 1, "sampled")
    return DensityVerdict(UNFALSIFIED, None, trials, "sampled")


# ---------------------------------------------------------------- degree-dense

def _low_count(G: PartitionedGraph, side: Sequence[int], other: VertexSet, delta: float) -> list[int]:
    need = delta * other.bit_count()
    return [v for v in side if (G.adj[v] & other).bit_count() < need - _TOL]


def check_degree_dense(G: PartitionedGraph, alpha: float, eps: float, delta: float, mode="exact") -> DensityVerdict:
    if len(G.parts) != 2:
        raise PreconditionViolated("degree-dense check needs a bipartite graph with two parts")
    kind, trials, seed = _parse_mode(mode)
    V = [members(G.parts[0]), members(G.parts[1])]
    kmin = [_min_size(alpha, len(V[0])), _min_size(alpha, len(V[1]))]
    if kind == "exact":
        if len(V[0]) + len(V[1]) > EXACT_LIMIT:
            raise SizeLimitExceeded("exact degree-dense check is capped at %d vertices" % EXACT_LIMIT)
        # Fix X_o; the side-s condition fails for some X_s iff we can pack more than eps*|X_s|
        # low-degree vertices into an admissible X_s.  Best packing: take all low ones, pad with
        # high ones only up to the minimum size.
        for s in (0, 1):
            o = 1 - s
            for size in range(kmin[o], len(V[o]) + 1):
                for sub in combinations(V[o], size):
                    xo = vset(sub)
                    low = _low_count(G, V[s], xo, delta)
                    high = [v for v in V[s] if v not in set(low)]
                    k = max(kmin[s], len(low))
                    if k > len(V[s]):
                        continue
                    chosen_low = low[:k]
                    if len(chosen_low) > eps * k + _TOL:
                        xs = tuple(sorted(chosen_low + high[: k - len(chosen_low)]))
                        frac = len(chosen_low) / k
                        pair = (xs, sub) if s == 0 else (sub, xs)
                        return DensityVerdict(REFUTED, pair + (frac,), 0, "exact")
        return DensityVerdict(CERTIFIED, None, 0, "exact")

    rng = make_rng(seed, 0xDD)
    for trial in range(trials):
        picks = []
        for s in (0, 1):
            size = int(rng.integers(kmin[s], len(V[s]) + 1))
            picks.append(sorted(int(V[s][i]) for i in rng.choice(len(V[s]), size=size, replace=False)))
        bits = [vset(p) for p in picks]
        for s in (0, 1):
            low = _low_count(G, picks[s], bits[1 - s], delta)
            if len(low) > eps * len(picks[s]) + _TOL:
                return DensityVerdict(REFUTED, (tuple(picks[0]), tuple(picks[1]), len(low) / len(picks[s])),
                                      trial + 1, "sampled")
    return DensityVerdict(UNFALSIFIED, None, trials, "sampled")


def degree_dense_violation(G: PartitionedGraph, X1: VertexSet, X2: VertexSet, eps: float, delta: float) -> bool:
    """Direct recheck of one (X1, X2) pair: True when some side has too many low-degree vertices."""
    for xs, xo in ((X1, X2), (X2, X1)):
        low = _low_count(G, members(xs), xo, delta)
        if len(low) > eps * xs.bit_count() + _TOL:
            return True
    return False


# ---------------------------------------------------------------- degrees

def relative_min_degree(G: PartitionedGraph) -> float:
    if len(G.parts) != 2:
        raise PreconditionViolated("relative minimum degree needs two parts")
    a, b = G.parts
    best = 1.0
    for side, other in ((a, b), (b, a)):
        size = other.bit_count()
        if not size:
            return 0.0
        for v in members(side):
            best = min(best, (G.adj[v] & other).bit_count() / size)
    return best


# ---------------------------------------------------------------- reduced graphs

def reduced_graph(G: PartitionedGraph, parts: Sequence[VertexSet], eps: float, delta: float,
                  mode="exact") -> PartitionedGraph:
    """One vertex per part; edge ij unless the pair (V_i, V_j) is refuted as (eps, delta)-dense.

    The verdict for every pair is stored in ``meta["verdicts"]`` keyed ``"i,j"``.
    """
    seen = 0
    for p in parts:
        if p & seen:
            raise PreconditionViolated("parts must be disjoint")
        seen |= p
    k = len(parts)
    kind, trials, seed = _parse_mode(mode)
    verdicts: dict[str, dict] = {}
    edges = []
    for i in range(k):
        for j in range(i + 1, k):
            m = mode if kind == "exact" else (kind, trials, seed * 1_000_003 + i * k + j)
            v = check_dense_pair(G, parts[i], parts[j], eps, delta, m)
            verdicts["%d,%d" % (i, j)] = v.to_json()
            if v.status != REFUTED:
                edges.append((i, j))
    return PartitionedGraph.from_edges(k, edges, meta={"verdicts": verdicts, "eps": eps, "delta": delta})


def pair_density(G: PartitionedGraph, X: VertexSet, Y: VertexSet) -> float:
    sx, sy = X.bit_count(), Y.bit_count()
    if not sx or not sy:
        return 0.0
    return edge_count(G, X, Y) / (sx * sy)
