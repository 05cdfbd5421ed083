"""Seeded instance generators.

Each generator re-verifies the guarantee it promises (degeneracy, locality,
proper colouring, minimum degree) before handing the instance out, and
records the checks in ``meta["certificate"]``.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .config import make_rng
from .errors import InfeasibleParams, InternalInvariantBroken, PreconditionViolated, RetryExhausted
from .graph import Labelling, PartitionedGraph, degeneracy_ordering, members, verify_labelling


def _proper(H: PartitionedGraph, coloring: Sequence[int]) -> bool:
    return all(coloring[u] != coloring[v] for u, v in H.edges())


def gen_degenerate_bandwidth_H(n: int, d: int, beta: int, r: int, seed: int, *, fill: float = 1.0,
                               priority: str = "label") -> tuple[PartitionedGraph, Labelling, tuple[int, ...]]:
    """Random d-degenerate graph with a beta-local labelling and a proper r-colouring.

    Vertex ``v`` carries label ``v + 1`` and colour ``v mod r``.  Vertices are
    processed in a priority order; each picks up to ``d`` earlier vertices
    that lie within label distance ``beta`` and carry a different colour.
    With ``priority="label"`` the priority order is the labelling itself, so
    the labelling is already d-degenerate.  With ``priority="random"`` it is
    a random permutation, so only the graph (not the labelling) is
    d-degenerate.  Each of the ``d`` slots is kept with probability ``fill``.
    """
    if beta < 1 or d < 1 or r < 2:
        raise InfeasibleParams("need beta >= 1, d >= 1, r >= 2", n=n, d=d, beta=beta, r=r)
    if n < 0:
        raise InfeasibleParams("n must be nonnegative")
    rng = make_rng(seed, 0x6E0)
    if priority == "label":
        order = np.arange(n)
    elif priority == "random":
        order = rng.permutation(n)
    else:
        raise PreconditionViolated("priority must be 'label' or 'random'")
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    color = tuple(v % r for v in range(n))
    adj = [0] * n
    for v in order.tolist():
        lo, hi = max(0, v - beta), min(n - 1, v + beta)
        cands = [u for u in range(lo, hi + 1) if u != v and rank[u] < rank[v] and color[u] != color[v]]
        want = int(rng.binomial(d, fill)) if fill < 1.0 else d
        if not cands or want == 0:
            continue
        picks = rng.choice(len(cands), size=min(want, len(cands)), replace=False)
        for i in picks.tolist():
            u = cands[i]
            adj[v] |= 1 << u
            adj[u] |= 1 << v
    H = PartitionedGraph(n, adj, [sum(1 << v for v in range(c, n, r)) for c in range(r)])
    lab = Labelling(tuple(range(1, n + 1)))
    _, degen = degeneracy_ordering(H)
    rep = verify_labelling(H, lab, n, beta)
    if degen > d or not rep.local_ok or not _proper(H, color):
        raise InternalInvariantBroken("generated H fails its construction guarantees")
    if priority == "label" and not verify_labelling(H, lab, d, beta).ok:
        raise InternalInvariantBroken("label-priority H is not d-degenerate under its labelling")
    H.meta["certificate"] = {"degeneracy": degen, "d": d, "beta": beta, "local_ok": True,
                             "proper_colouring": True, "priority": priority}
    return H, lab, color


def gen_dense_rpartite_G(sizes: Sequence[int], p, seed: int) -> PartitionedGraph:
    """Random r-partite graph: each cross pair (i, j) independently with probability p or p[i][j]."""
    r = len(sizes)
    P = np.full((r, r), float(p)) if np.isscalar(p) else np.asarray(p, dtype=float)
    if P.shape != (r, r) or (P < 0).any() or (P > 1).any():
        raise PreconditionViolated("p must be a probability or an r x r matrix of probabilities")
    n = int(sum(sizes))
    offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    part_idx = np.repeat(np.arange(r), sizes)
    rng = make_rng(seed, 0xD3)
    U = rng.random((n, n))
    prob = P[part_idx[:, None], part_idx[None, :]]
    M = np.triu(U < prob, 1)
    M &= part_idx[:, None] != part_idx[None, :]
    M = M | M.T
    parts = [sum(1 << v for v in range(offs[i], offs[i + 1])) for i in range(r)]
    G = PartitionedGraph.from_matrix(M, parts, strict=True)
    dens = {}
    for i in range(r):
        for j in range(i + 1, r):
            block = M[offs[i]:offs[i + 1], offs[j]:offs[j + 1]]
            dens["%d,%d" % (i, j)] = float(block.mean()) if block.size else 0.0
    G.meta["certificate"] = {"pair_density": dens, "p": P.tolist()}
    return G


def gen_min_degree_G(n: int, gamma: float, seed: int, *, p: float | None = None, retries: int = 50) -> PartitionedGraph:
    """G(n, p) resampled until its minimum degree is at least gamma*n."""
    p = min(1.0, gamma + 0.1) if p is None else p
    need = math.ceil(gamma * n - 1e-12)
    for attempt in range(retries):
        rng = make_rng(seed, 0x31D, attempt)
        M = np.triu(rng.random((n, n)) < p, 1)
        M = M | M.T
        low = int(M.sum(axis=1).min()) if n else 0
        if low >= need:
            G = PartitionedGraph.from_matrix(M)
            G.meta["certificate"] = {"min_degree": low, "required": need, "attempt": attempt}
            return G
    raise RetryExhausted("no sample reached minimum degree %d in %d tries" % (need, retries))


def gen_two_colored_Kn(t: int, q: int, r: int, seed: int, *, p_band: float = 0.85, p_off: float = 0.3,
                       p_inside: float = 0.5) -> PartitionedGraph:
    """Two-coloured K_n given by its red graph, with a planted red path power.

    There are ``t`` parts of ``q`` vertices.  A hidden order ``pi`` of the parts
    is drawn; pairs of parts at hidden distance at most ``r`` are red with
    probability ``p_band``, other pairs with ``p_off``, and pairs inside a
    part with ``p_inside``.  Part ``i`` occupies vertex ids ``[i q, (i+1) q)``.
    """
    if t < 1 or q < 1 or r < 1:
        raise InfeasibleParams("t, q, r must be positive")
    rng = make_rng(seed, 0x2C)
    pi = rng.permutation(t)
    pos = np.empty(t, dtype=int)
    pos[pi] = np.arange(t)
    P = np.where(np.abs(pos[:, None] - pos[None, :]) <= r, p_band, p_off)
    np.fill_diagonal(P, p_inside)
    n = t * q
    part_idx = np.repeat(np.arange(t), q)
    M = np.triu(rng.random((n, n)) < P[part_idx[:, None], part_idx[None, :]], 1)
    M = M | M.T
    parts = [sum(1 << v for v in range(i * q, (i + 1) * q)) for i in range(t)]
    G = PartitionedGraph.from_matrix(M, parts)
    G.meta["planted_order"] = [int(x) for x in pi]
    G.meta["certificate"] = {"p_band": p_band, "p_off": p_off, "r": r}
    return G


def gen_planted_backbone_G(k: int, r: int, q: int, seed: int, *, p_hi: float = 0.9,
                           p_lo: float = 0.05) -> PartitionedGraph:
    """Host on parts (i, j), i < k, j < r, of ``q`` vertices each.

    Pairs in different columns are dense (``p_hi``), which plants B_k^r and a
    clique on every row.  Same-column pairs are dense when their rows differ
    by at least two and sparse (``p_lo``) otherwise, so every row has a part
    joined densely to all of it.  Part (i, j) has index ``i*r + j``.
    """
    t = k * r
    P = np.empty((t, t))
    for a in range(t):
        for b in range(t):
            (i, j), (i2, j2) = divmod(a, r), divmod(b, r)
            if j != j2:
                P[a, b] = p_hi
            else:
                P[a, b] = p_hi if abs(i - i2) >= 2 else p_lo
    G = gen_dense_rpartite_G([q] * t, P, seed)
    G = PartitionedGraph(G.n, G.adj, G.parts, meta=dict(G.meta), check=False)
    G.meta["planted"] = {"k": k, "r": r, "q": q, "index": "i*r+j"}
    return G


def planted_parts(G: PartitionedGraph) -> list[list[int]]:
    return [members(p) for p in G.parts]
