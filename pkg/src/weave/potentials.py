"""Potentials, commonness, heavy cliques and crossing families.

Tuple conventions
-----------------
* ``potential`` counts ORDERED tuples drawn from X with repetition.
* ``is_common`` checks SUBSETS of size ``min(d, |X|)``; repeating a vertex
  never tightens a common-neighbourhood constraint.

Exact potentials use the fact that "having at least β common neighbours"
is inherited by subsets.  Only the supports passing the threshold are
enumerated, and the number of L-tuples whose support is a given k-set is the
surjection count k!·S(L, k).  So the number of violating tuples is
|X|^L minus the surjection-weighted count of good supports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .config import budget as _budget, make_rng
from .errors import BudgetExceeded, PreconditionViolated
from .graph import PartitionedGraph, VertexSet, members


@lru_cache(maxsize=None)
def surjections(L: int, k: int) -> int:
    """Number of maps from an L-set onto a k-set."""
    return sum((-1) ** j * math.comb(k, j) * (k - j) ** L for j in range(k + 1))


@dataclass(frozen=True)
class PotentialCount:
    p: int
    d: int
    beta: float
    tuple_space: int
    value: int | None = None
    estimate: float | None = None
    stderr: float | None = None
    trials: int = 0
    ordered: bool = True

    @property
    def exact(self) -> bool:
        return self.value is not None

    @property
    def best(self) -> float:
        return float(self.value) if self.value is not None else float(self.estimate)

    def to_json(self) -> dict:
        return {"p": self.p, "d": self.d, "beta": self.beta, "tuple_space": self.tuple_space,
                "value": self.value, "estimate": self.estimate, "stderr": self.stderr,
                "trials": self.trials, "ordered": self.ordered}


def _rows(G: PartitionedGraph, X: VertexSet, Y: VertexSet) -> tuple[list[int], list[int]]:
    xs = members(X)
    adj = G.adj
    return xs, [adj[x] & Y for x in xs]


def codegrees(G: PartitionedGraph, xs: Sequence[int], Y: VertexSet) -> np.ndarray:
    """Matrix of |N(u) ∩ N(v) ∩ Y| for u, v in ``xs`` (diagonal holds degrees into Y)."""
    ys = members(Y)
    if not ys or not len(xs):
        return np.zeros((len(xs), len(xs)), dtype=np.int64)
    M = G.matrix()[np.ix_(list(xs), ys)].astype(np.float32)
    return np.rint(M @ M.T).astype(np.int64)


def good_support_counts(rows: Sequence[int], L: int, beta: float) -> list[int]:
    """counts[k] = number of k-subsets (1 <= k <= L) whose rows intersect in >= beta vertices."""
    counts = [0] * (L + 1)
    n = len(rows)
    if L <= 0 or n == 0:
        return counts
    stack = [(0, -1, 1)]  # (start index, running intersection, depth); -1 == all ones
    while stack:
        start, cn, depth = stack.pop()
        for i in range(start, n):
            c = cn & rows[i]
            if c.bit_count() >= beta:
                counts[depth] += 1
                if depth < L and i + 1 < n:
                    stack.append((i + 1, c, depth + 1))
    return counts


def _good_counts_fast(G: PartitionedGraph, xs: list[int], rows: list[int], Y: VertexSet, L: int,
                      beta: float) -> list[int]:
    if L <= 2 and len(xs) > 64:
        counts = [0] * (L + 1)
        C = codegrees(G, xs, Y)
        counts[1] = int((np.diag(C) >= beta).sum())
        if L == 2:
            iu = np.triu_indices(len(xs), 1)
            counts[2] = int((C[iu] >= beta).sum())
        return counts
    return good_support_counts(rows, L, beta)


def potential(G: PartitionedGraph, X: VertexSet, Y: VertexSet, p: int, d: int, beta: float,
              mode="exact", *, budget: int | None = None) -> PotentialCount:
    """(p, d, beta)-potential of X in Y: ordered (p+d)-tuples from X with fewer than beta
    common neighbours in Y."""
    L = p + d
    xs, rows = _rows(G, X, Y)
    space = len(xs) ** L
    if isinstance(mode, str):
        kind, trials, seed = mode, 10_000, 0
    else:
        kind, trials, seed = mode
    if kind == "exact":
        cap = _budget(budget)
        if space > cap:
            raise BudgetExceeded("|X|^(p+d) = %d exceeds the exact budget %d" % (space, cap))
        if L == 0:
            return PotentialCount(p, d, beta, 1, value=int(Y.bit_count() < beta))
        counts = _good_counts_fast(G, xs, rows, Y, L, beta)
        good = sum(counts[k] * surjections(L, k) for k in range(1, L + 1))
        return PotentialCount(p, d, beta, space, value=space - good)

    if kind != "sampled":
        raise PreconditionViolated("unknown mode %r" % (mode,))
    trials = int(trials)
    if trials <= 0:
        raise PreconditionViolated("sampled mode needs trials > 0")
    if L == 0 or not xs:
        v = int(Y.bit_count() < beta) if L == 0 else 0
        return PotentialCount(p, d, beta, space, estimate=float(v), stderr=0.0, trials=trials)
    rng = make_rng(seed, 0x907)
    idx = rng.integers(0, len(xs), size=(trials, L))
    bad = 0
    for row in idx.tolist():
        c = Y
        for i in row:
            c &= rows[i]
        if c.bit_count() < beta:
            bad += 1
    f = bad / trials
    return PotentialCount(p, d, beta, space, estimate=f * space,
                          stderr=math.sqrt(f * (1 - f) / trials) * space, trials=trials)


def brute_potential(G: PartitionedGraph, X: VertexSet, Y: VertexSet, p: int, d: int, beta: float) -> int:
    """Reference count by walking every ordered tuple."""
    from itertools import product

    xs = members(X)
    total = 0
    for tup in product(xs, repeat=p + d):
        c = Y
        for v in tup:
            c &= G.adj[v]
        if c.bit_count() < beta:
            total += 1
    return total


def is_common(G: PartitionedGraph, X: VertexSet, Y: VertexSet, d: int, beta: float,
              *, budget: int | None = None) -> tuple[bool, tuple[int, ...] | None]:
    """Every subset of X of size min(d, |X|) has at least beta common neighbours in Y."""
    xs, rows = _rows(G, X, Y)
    if not xs:
        raise PreconditionViolated("X must be nonempty")
    if beta <= 0:
        return True, None
    k = min(d, len(xs))
    if k <= 0:
        return (Y.bit_count() >= beta), (None if Y.bit_count() >= beta else ())
    cap = _budget(budget)
    if math.comb(len(xs), k) > cap:
        raise BudgetExceeded("C(%d, %d) subsets exceed the budget %d" % (len(xs), k, cap))
    if k == 1:
        for x, row in zip(xs, rows):
            if row.bit_count() < beta:
                return False, (x,)
        return True, None
    if k == 2 and len(xs) > 64:
        C = codegrees(G, xs, Y)
        bad = np.argwhere(np.triu(C < beta, 1))
        if len(bad):
            i, j = bad[0]
            return False, (xs[int(i)], xs[int(j)])
        return True, None
    # depth-first over subsets in lexicographic order; a violating prefix is padded
    n = len(xs)
    stack = [(0, -1, ())]
    while stack:
        start, cn, chosen = stack.pop()
        depth = len(chosen) + 1
        for i in range(n - 1, start - 1, -1):  # reversed push keeps lexicographic pop order
            if n - i < k - depth + 1:
                continue
            c = cn & rows[i]
            here = chosen + (i,)
            if c.bit_count() < beta:
                pad = [j for j in range(n) if j not in here][: k - depth]
                return False, tuple(sorted(xs[j] for j in here + tuple(pad)))
            if depth < k:
                stack.append((i + 1, c, here))
    return True, None


def is_negligible(G: PartitionedGraph, X: VertexSet, Y: VertexSet, p: int, d: int, beta: float, lam: float,
                  *, budget: int | None = None) -> bool:
    if lam <= 0:
        raise PreconditionViolated("lambda must be positive")
    val = potential(G, X, Y, p, d, beta, "exact", budget=budget).value
    return val < lam ** (p - 1)


def negligible_threshold(lam: float, p: int) -> float:
    return lam ** (p - 1)


# ---------------------------------------------------------------- crossing families

@dataclass
class CrossingFamily:
    """Labelled copies of a pattern across a tuple of parts.

    ``members[k][j]`` is the tuple of vertices that copy ``k`` places in slot
    ``slots[j]``.  Pattern ``"K"`` has one vertex per slot; ``"K2"`` has two.
    A sampled family sets ``exhaustive=False`` and ``scale`` to the number of
    copies each member stands for.
    """

    pattern: str
    parts: tuple[int, ...]
    members: list[tuple[tuple[int, ...], ...]]
    slots: tuple[int, ...] | None = None
    exhaustive: bool = True
    scale: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.slots is None:
            self.slots = tuple(range(len(self.parts)))
        self.members = list(self.members)

    def __len__(self) -> int:
        return len(self.members)

    @property
    def r(self) -> int:
        return len(self.parts)

    @property
    def estimated_size(self) -> float:
        return len(self.members) * self.scale

    def crossing(self, sets: Sequence[VertexSet]) -> "CrossingFamily":
        """Sub-family of members whose slot groups sit inside ``sets``."""
        keep = []
        for mem in self.members:
            if all(all(sets[s] >> v & 1 for v in grp) for s, grp in zip(self.slots, mem)):
                keep.append(mem)
        return CrossingFamily(self.pattern, self.parts, keep, self.slots, self.exhaustive, self.scale)

    def to_json(self) -> dict:
        return {"pattern": self.pattern, "slots": list(self.slots), "members": [[list(g) for g in m] for m in self.members],
                "exhaustive": self.exhaustive, "scale": self.scale}


def clique_members(cliques: Iterable[Sequence[int]]) -> list[tuple[tuple[int, ...], ...]]:
    return [tuple((v,) for v in c) for c in cliques]


def is_heavy(G: PartitionedGraph, clique: Sequence[int], parts: Sequence[VertexSet], delta: float) -> bool:
    """Each (r-1)-subtuple has at least delta|V_j| common neighbours in V_j."""
    adj = G.adj
    for j, Vj in enumerate(parts):
        c = Vj
        for i, v in enumerate(clique):
            if i != j:
                c &= adj[v]
        if c.bit_count() < delta * Vj.bit_count() - 1e-12:
            return False
    return True


def is_crossing_clique(G: PartitionedGraph, clique: Sequence[int], across: Sequence[VertexSet]) -> bool:
    adj = G.adj
    for i, v in enumerate(clique):
        if not across[i] >> v & 1:
            return False
        for u in clique[i + 1:]:
            if not adj[v] >> u & 1:
                return False
    return True


def heavy_cliques(G: PartitionedGraph, parts: Sequence[VertexSet], delta: float,
                  across: Sequence[VertexSet] | None = None, *, budget: int | None = None) -> CrossingFamily:
    """All delta-heavy copies of K_r with slot i in ``across[i]`` (default: the parts themselves).

    Heaviness is measured against ``parts``.  Backtracking prunes a prefix
    as soon as its common neighbourhood in a later part drops below the
    heaviness threshold, since the full (r-1)-tuple only sees fewer vertices.
    """
    r = len(parts)
    if r < 2:
        raise PreconditionViolated("need at least two parts")
    across = tuple(parts) if across is None else tuple(across)
    cap = _budget(budget)
    space = math.prod(a.bit_count() for a in across)
    if space > cap:
        raise BudgetExceeded("product of part sizes %d exceeds budget %d" % (space, cap))
    need = [delta * p.bit_count() - 1e-12 for p in parts]
    adj = G.adj
    out: list[tuple[int, ...]] = []

    def extend(prefix: list[int], cns: list[int]) -> None:
        t = len(prefix)
        if t == r:
            if is_heavy(G, prefix, parts, delta):
                out.append(tuple(prefix))
            return
        for v in members(across[t] & cns[t]):
            nxt = list(cns)
            ok = True
            for j in range(r):
                if j == t:
                    continue
                nxt[j] = cns[j] & adj[v]
                if j > t and (nxt[j] & parts[j]).bit_count() < need[j]:
                    ok = False
                    break
            if ok:
                prefix.append(v)
                extend(prefix, nxt)
                prefix.pop()

    extend([], [-1] * r)
    return CrossingFamily("K", tuple(parts), clique_members(out), exhaustive=True)


def sample_heavy_cliques(G: PartitionedGraph, parts: Sequence[VertexSet], delta: float,
                         across: Sequence[VertexSet] | None, count: int, seed: int,
                         max_tries: int | None = None) -> CrossingFamily:
    """Uniform rejection sample of distinct heavy cliques across ``across``.

    ``scale`` is set so that ``estimated_size`` estimates the full family size.
    """
    across = tuple(parts) if across is None else tuple(across)
    pools = [members(a) for a in across]
    space = math.prod(len(p) for p in pools)
    fam = CrossingFamily("K", tuple(parts), [], exhaustive=False, scale=0.0)
    if space == 0 or count <= 0:
        return fam
    rng = make_rng(seed, 0xC11)
    max_tries = max_tries or 60 * count
    seen: set[tuple[int, ...]] = set()
    hits = tries = 0
    batch = 256
    while tries < max_tries and len(seen) < count:
        draws = [rng.integers(0, len(p), size=batch) for p in pools]
        for b in range(batch):
            tries += 1
            clique = tuple(pools[i][int(draws[i][b])] for i in range(len(pools)))
            if is_crossing_clique(G, clique, across) and is_heavy(G, clique, parts, delta):
                hits += 1
                seen.add(clique)
                if len(seen) >= count:
                    break
            if tries >= max_tries:
                break
    fam.members = clique_members(sorted(seen))
    if seen:
        fam.scale = (hits / tries) * space / len(seen)
    return fam


def _member_bits(G: PartitionedGraph, member) -> tuple[list[int], list[int]]:
    groups, nbrs = [], []
    for grp in member:
        g, nb = 0, -1
        for v in grp:
            g |= 1 << v
            nb &= G.adj[v]
        groups.append(g)
        nbrs.append(nb)
    return groups, nbrs


def crossing_adjacent(G: PartitionedGraph, F1, F2, slots1: Sequence[int] | None = None,
                      slots2: Sequence[int] | None = None) -> bool:
    """For all distinct slots j, j': every vertex of group j of F1 is adjacent to every
    vertex of group j' of F2."""
    s1 = tuple(range(len(F1))) if slots1 is None else tuple(slots1)
    s2 = tuple(range(len(F2))) if slots2 is None else tuple(slots2)
    g1, _ = _member_bits(G, F1)
    _, n2 = _member_bits(G, F2)
    for a, j in enumerate(s1):
        for b, jj in enumerate(s2):
            if j != jj and g1[a] & ~n2[b]:
                return False
    return True


@dataclass(frozen=True)
class RhoCount:
    total: int
    degrees: tuple[int, ...]  # per member of the first family


def _allowed(G: PartitionedGraph, fam: CrossingFamily) -> list[dict[int, int]]:
    """For each member Y of ``fam``: slot j -> vertices adjacent to every group of Y outside slot j."""
    out = []
    for mem in fam.members:
        _, nbrs = _member_bits(G, mem)
        per = {}
        for j in range(fam.r):
            acc = -1
            for b, jj in enumerate(fam.slots):
                if jj != j:
                    acc &= nbrs[b]
            per[j] = acc
        out.append(per)
    return out


def rho(G: PartitionedGraph, K: CrossingFamily, F: CrossingFamily, *, budget: int | None = None) -> RhoCount:
    """Number of adjacent pairs in K x F, with per-member degrees of K."""
    cap = _budget(budget)
    if len(K) * len(F) > cap:
        raise BudgetExceeded("|K||F| = %d exceeds budget %d" % (len(K) * len(F), cap))
    allowed = _allowed(G, F)
    degs = []
    for mem in K.members:
        groups, _ = _member_bits(G, mem)
        pairs = list(zip(K.slots, groups))
        dk = 0
        for al in allowed:
            if all(not (g & ~al[j]) for j, g in pairs):
                dk += 1
        degs.append(dk)
    return RhoCount(sum(degs), tuple(degs))


def heavy_wrt_family(G: PartitionedGraph, member, F: CrossingFamily, delta: float,
                     slots: Sequence[int] | None = None) -> bool:
    """At least delta|F| members of F are adjacent to ``member`` (true for empty F)."""
    slots = tuple(range(len(member))) if slots is None else tuple(slots)
    groups, _ = _member_bits(G, member)
    count = 0
    for al in _allowed(G, F):
        if all(not (g & ~al[j]) for j, g in zip(slots, groups)):
            count += 1
    return count >= delta * len(F) - 1e-12


def naive_adjacent(G: PartitionedGraph, F1, F2) -> bool:
    """Four nested loops straight from the definition; reference for ``crossing_adjacent``."""
    for j, g1 in enumerate(F1):
        for jj, g2 in enumerate(F2):
            if j == jj:
                continue
            for u in g1:
                for v in g2:
                    if not G.has_edge(u, v):
                        return False
    return True


def tuple_potential_across(G: PartitionedGraph, sets: Sequence[VertexSet], p: int, d: int, beta: float,
                           mode="exact", *, budget: int | None = None) -> list[PotentialCount]:
    """Potential of A_{-i} in A_i for every i."""
    out = []
    for i, Ai in enumerate(sets):
        rest = 0
        for j, Aj in enumerate(sets):
            if j != i:
                rest |= Aj
        out.append(potential(G, rest, Ai, p, d, beta, mode, budget=budget))
    return out


def all_subsets_common(G: PartitionedGraph, X: VertexSet, Y: VertexSet, d: int, beta: float) -> bool:
    """Reference check for ``is_common`` by plain enumeration."""
    xs = members(X)
    k = min(d, len(xs))
    for sub in combinations(xs, k):
        c = Y
        for v in sub:
            c &= G.adj[v]
        if c.bit_count() < beta:
            return False
    return True
