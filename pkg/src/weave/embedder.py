"""Greedy extension steps and the block-by-block embedding pipelines.

A pipeline walks H in label order, one block at a time.  Before each block
it selects seed tuples by dependent random choice inside the residual host
(the host minus the images of blocks that can no longer have neighbours to
come), then places the block's vertices greedily: each vertex goes to the
lowest-index unused common neighbour of its already-placed neighbours,
inside the target set for its side or colour.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .config import child_seed
from .drc import DrcOutcome, DrcParams, recheck_outcome, select_bipartite, select_rpartite
from .errors import (ExtensionStuck, InternalInvariantBroken, PartitionRejected, PipelineFailed,
                     PreconditionViolated, SelectionFailed, WeaveError)
from .graph import Labelling, PartitionedGraph, VertexSet, common_neighbors, lowest, members, verify_labelling
from .config import make_rng
from .potentials import rho, sample_heavy_cliques


# ---------------------------------------------------------------- state

@dataclass
class PartialEmbedding:
    labelling: Labelling
    map: dict[int, int] = field(default_factory=dict)  # H vertex -> G vertex
    used: VertexSet = 0
    block_ledger: dict[int, list[int]] = field(default_factory=dict)  # block -> G images

    def assign(self, v: int, x: int, block: int = 0) -> None:
        if v in self.map:
            raise InternalInvariantBroken("vertex %d is already mapped" % v)
        if self.used >> x & 1:
            raise InternalInvariantBroken("image %d is already used" % x)
        self.map[v] = x
        self.used |= 1 << x
        self.block_ledger.setdefault(block, []).append(x)

    def images(self, blocks: Sequence[int]) -> VertexSet:
        out = 0
        for b in blocks:
            for x in self.block_ledger.get(b, ()):
                out |= 1 << x
        return out

    def copy(self) -> "PartialEmbedding":
        return PartialEmbedding(self.labelling, dict(self.map), self.used,
                                {b: list(xs) for b, xs in self.block_ledger.items()})

    @property
    def mapped_prefix(self) -> int:
        """Largest t with labels 1..t all mapped."""
        t = 0
        while t < self.labelling.m and self.labelling.vertex(t + 1) in self.map:
            t += 1
        return t

    def to_json(self) -> dict:
        lab = self.labelling
        return {"map": {str(lab[v]): x for v, x in sorted(self.map.items(), key=lambda kv: lab[kv[0]])},
                "blocks": {str(b): xs for b, xs in sorted(self.block_ledger.items())}}


@dataclass
class PipelineParams:
    d: int
    beta: int
    block: int | None = None  # default: 2*beta (bipartite) or beta (r-partite)
    drc: DrcParams = field(default_factory=DrcParams)
    tie_break: str = "lowest"
    release_lag: int = 2
    alpha: float = 0.0  # parts of H may fill at most (1 - alpha) of the host parts
    heavy_delta: float | None = None  # heaviness scale for the clique families (default: drc.delta)
    audit: bool = True  # re-verify every exact-pass certificate entry
    seed: int = 0

    def __post_init__(self):
        if self.beta < 1 or self.d < 0:
            raise PreconditionViolated("need beta >= 1 and d >= 0")
        if self.block is not None and self.block < 1:
            raise PreconditionViolated("block must be at least 1")
        if self.tie_break != "lowest":
            raise PreconditionViolated("only the lowest-index tie-break is implemented")

    @classmethod
    def from_json(cls, doc: dict) -> "PipelineParams":
        doc = dict(doc)
        missing = [k for k in ("d", "beta") if doc.get(k) is None]
        if missing:
            raise PreconditionViolated("pipeline parameters need %s" % " and ".join(missing))
        drc = doc.pop("drc", None)
        if isinstance(drc, dict):
            drc = DrcParams.from_json({"d": doc.get("d", 2), **drc})
        return cls(drc=drc or DrcParams(d=doc.get("d", 2)), **doc)

    def to_json(self) -> dict:
        return {"d": self.d, "beta": self.beta, "block": self.block, "drc": self.drc.to_json(),
                "tie_break": self.tie_break, "release_lag": self.release_lag, "alpha": self.alpha,
                "heavy_delta": self.heavy_delta, "audit": self.audit, "seed": self.seed}


# ---------------------------------------------------------------- verification

def verify_embedding(G: PartitionedGraph, H: PartitionedGraph, f: PartialEmbedding | dict,
                     allowed: Callable[[int], VertexSet] | None = None, *,
                     total: bool = True) -> tuple[bool, str | None]:
    """Injective, edge-preserving and (optionally) inside ``allowed(v)`` for every H-vertex v."""
    mp = f.map if isinstance(f, PartialEmbedding) else f
    if total and len(mp) != H.n:
        missing = next(v for v in range(H.n) if v not in mp)
        return False, "vertex %d is not mapped" % missing
    seen: dict[int, int] = {}
    for v, x in mp.items():
        if not 0 <= x < G.n:
            return False, "image %d of %d is outside G" % (x, v)
        if x in seen:
            return False, "vertices %d and %d share image %d" % (seen[x], v, x)
        seen[x] = v
        if allowed is not None and not allowed(v) >> x & 1:
            return False, "vertex %d mapped outside its part" % v
    for u, v in H.edges():
        if u in mp and v in mp and not G.has_edge(mp[u], mp[v]):
            return False, "edge (%d, %d) maps to non-edge (%d, %d)" % (u, v, mp[u], mp[v])
    return True, None


def _back(H: PartitionedGraph, lab: Labelling, v: int) -> list[int]:
    lv = lab[v]
    return [u for u in members(H.adj[v]) if lab[u] < lv]


def _check_prefix(f: PartialEmbedding, lo: int) -> None:
    for label in range(1, lo + 1):
        if f.labelling.vertex(label) not in f.map:
            raise PreconditionViolated("partial embedding is not defined on label %d" % label)


def _place(G: PartitionedGraph, H: PartitionedGraph, f: PartialEmbedding, v: int, target: VertexSet,
           block: int, label: int) -> None:
    back = _back(H, f.labelling, v)
    imgs = []
    for u in back:
        if u not in f.map:
            raise PreconditionViolated("back-neighbour %d of label %d is not mapped" % (u, label))
        imgs.append(f.map[u])
    cand = common_neighbors(G, imgs, target) & ~f.used
    if not cand:
        raise ExtensionStuck("no free common neighbour for label %d" % label, t=label, back_images=imgs,
                             candidates=common_neighbors(G, imgs, target).bit_count())
    f.assign(v, lowest(cand), block)


# ---------------------------------------------------------------- extension steps

def extend_bipartite(G: PartitionedGraph, H: PartitionedGraph, f: PartialEmbedding, A1: VertexSet, A2: VertexSet,
                     B1: VertexSet, B2: VertexSet, rng: tuple[int, int], *, block: int = 0) -> PartialEmbedding:
    """Extend ``f`` from labels [1..lo] over (lo, hi].

    H.parts gives the sides.  A side-1 vertex goes to A1 & B1 and a side-2
    vertex to A2 & B2; this always succeeds when A2 is (d, hi)-common into
    A1 & B1 and A1 is (d, hi)-common into A2 & B2 and the images of labels
    up to lo lie in A1 | A2.
    """
    lo, hi = rng
    f = f.copy()
    if hi <= lo:
        return f
    _check_prefix(f, lo)
    if len(H.parts) != 2:
        raise PreconditionViolated("H needs two parts")
    targets = (A1 & B1, A2 & B2)
    for label in range(lo + 1, hi + 1):
        v = f.labelling.vertex(label)
        side = H.part_of[v]
        if side not in (0, 1):
            raise PreconditionViolated("vertex %d of H has no side" % v)
        _place(G, H, f, v, targets[side], block, label)
    return f


def extend_rpartite(G: PartitionedGraph, H: PartitionedGraph, f: PartialEmbedding, A: Sequence[VertexSet],
                    T: Sequence[Sequence[int]], rng: tuple[int, int], *, color: Sequence[int] | None = None,
                    allowed: Callable[[int], VertexSet] | None = None, block: int = 0) -> PartialEmbedding:
    """Extend ``f`` over (lo, hi]: a vertex of colour j goes to A_j & N(T_{-j}) (intersected
    with ``allowed(v)`` when given)."""
    lo, hi = rng
    f = f.copy()
    if hi <= lo:
        return f
    _check_prefix(f, lo)
    color = H.part_of if color is None else color
    r = len(A)
    targets = []
    for j in range(r):
        others = [x for i, t in enumerate(T) if i != j for x in t]
        targets.append(common_neighbors(G, others, A[j]))
    for label in range(lo + 1, hi + 1):
        v = f.labelling.vertex(label)
        j = color[v]
        if not 0 <= j < r:
            raise PreconditionViolated("vertex %d has colour %d outside [0, %d)" % (v, j, r))
        tgt = targets[j] if allowed is None else targets[j] & allowed(v)
        _place(G, H, f, v, tgt, block, label)
    return f


# ---------------------------------------------------------------- helpers

def _intervals(m: int, length: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + length, m)) for lo in range(0, m, length)]


def _check_release(H: PartitionedGraph, lab: Labelling, blocks: list[tuple[int, int]], t: int, lag: int) -> None:
    """No vertex of block t may have a neighbour in a released block."""
    if t < lag:
        return
    limit = blocks[t - lag][1]
    for label in range(blocks[t][0] + 1, blocks[t][1] + 1):
        v = lab.vertex(label)
        for u in members(H.adj[v]):
            if lab[u] <= limit:
                raise InternalInvariantBroken("edge from block %d reaches released label %d" % (t, lab[u]))


def _compact(outcome: DrcOutcome) -> dict:
    return {"T": [list(t) for t in outcome.T], "B_sizes": [b.bit_count() for b in outcome.B],
            "attempts": outcome.attempts,
            "certificate": [{k: v for k, v in e.items() if k != "witness"} for e in outcome.certificate.entries]}


def _fail(block: int, exc: WeaveError, f: PartialEmbedding, log: list) -> PipelineFailed:
    cause = type(exc).__name__
    return PipelineFailed("block %d failed: %s: %s" % (block, cause, exc), block=block, cause=cause,
                          details=getattr(exc, "details", {}), mapped=len(f.map), log=log)


def _check_labelling(H: PartitionedGraph, lab: Labelling, d: int, beta: int) -> None:
    rep = verify_labelling(H, lab, d, beta)
    if not rep.ok:
        raise PreconditionViolated("labelling is not %d-degenerate and %d-local: %r" % (d, beta, rep))


# ---------------------------------------------------------------- bipartite pipeline

def embed_bipartite(G: PartitionedGraph, H: PartitionedGraph, lab: Labelling,
                    params: PipelineParams) -> tuple[PartialEmbedding, dict]:
    """Embed a bipartite H (sides H.parts) into G (sides G.parts), W_i into V_i."""
    if len(G.parts) != 2 or len(H.parts) != 2:
        raise PreconditionViolated("G and H must both come with two parts")
    V1, V2 = G.parts
    for i, (W, V) in enumerate(zip(H.parts, G.parts)):
        if W.bit_count() > (1 - params.alpha) * V.bit_count() + 1e-9:
            raise PreconditionViolated("|W_%d| = %d exceeds (1 - alpha)|V_%d|" % (i + 1, W.bit_count(), i + 1))
    if params.release_lag < 2:
        raise PreconditionViolated("release_lag must be at least 2 in bipartite mode")
    _check_labelling(H, lab, params.d, params.beta)
    f = PartialEmbedding(lab)
    log: dict = {"blocks": [], "audit_failures": [], "params": params.to_json()}
    if H.n == 0:
        return f, log
    length = params.block or 2 * params.beta
    blocks = _intervals(H.n, length)
    A1, A2 = V1, V2
    lag = params.release_lag
    for t, (lo, hi) in enumerate(blocks):
        t0 = time.perf_counter()
        released = f.images(range(0, t - lag + 1))
        R1, R2 = V1 & ~released, V2 & ~released
        _check_release(H, lab, blocks, t, lag)
        drc = _with_seed(params.drc, child_seed(params.seed, t))
        try:
            out = select_bipartite(G, R1, R2, A1, A2, drc)
            f = extend_bipartite(G, H, f, A1, A2, out.B[0], out.B[1], (lo, hi), block=t)
        except (SelectionFailed, ExtensionStuck, PreconditionViolated) as exc:
            raise _fail(t, exc, f, log["blocks"]) from exc
        entry = {"block": t, "labels": [lo + 1, hi], "residual": [R1.bit_count(), R2.bit_count()],
                 "A": [A1.bit_count(), A2.bit_count()], "drc": _compact(out),
                 "seconds": time.perf_counter() - t0}
        if params.audit:
            bad = recheck_outcome(G, out)
            entry["audit"] = bad
            if bad:
                log["audit_failures"].append({"block": t, "ids": bad})
        log["blocks"].append(entry)
        keep_out = f.images(range(max(0, t - lag + 1), t))
        A1, A2 = out.B[0] & ~keep_out, out.B[1] & ~keep_out
    ok, why = verify_embedding(G, H, f, lambda v: G.parts[H.part_of[v]])
    if not ok:
        raise InternalInvariantBroken("pipeline produced an invalid embedding: %s" % why)
    return f, log


def _with_seed(p: DrcParams, seed: int) -> DrcParams:
    q = DrcParams.from_json(p.to_json())
    q.seed = seed
    return q


def embed_min_degree_bipartite(G: PartitionedGraph, H: PartitionedGraph, lab: Labelling, gamma: float, eps: float,
                               seed: int, params: PipelineParams, *, retries: int = 20) -> tuple[PartialEmbedding, dict]:
    """Random proportional bipartition of a host with minimum degree >= gamma n, then the
    bipartite pipeline on the bipartite subgraph between the two sides."""
    n = G.n
    if len(H.parts) != 2:
        raise PreconditionViolated("H must come with two parts")
    low = min((row.bit_count() for row in G.adj), default=0)
    if low < gamma * n - 1e-9:
        raise PreconditionViolated("minimum degree %d is below gamma n = %.1f" % (low, gamma * n))
    W1, W2 = (p.bit_count() for p in H.parts)
    if W1 + W2 > (gamma - eps) * n + 1e-9:
        raise PreconditionViolated("|H| = %d exceeds (gamma - eps) n = %.1f" % (W1 + W2, (gamma - eps) * n))
    w1, w2 = W1 + eps * n / 4, W2 + eps * n / 4
    n1 = round(w1 / (w1 + w2) * n)
    target = gamma - eps / 4
    for attempt in range(retries):
        perm = make_rng(seed, 0xB19, attempt).permutation(n)
        V1 = sum(1 << int(v) for v in perm[:n1])
        V2 = sum(1 << int(v) for v in perm[n1:])
        adj = [row & (V2 if V1 >> v & 1 else V1) for v, row in enumerate(G.adj)]
        Gb = PartitionedGraph(n, adj, [V1, V2], check=False)
        rel = min(min((Gb.adj[v] & V2).bit_count() / V2.bit_count() for v in members(V1)),
                  min((Gb.adj[v] & V1).bit_count() / V1.bit_count() for v in members(V2)))
        if rel >= target - 1e-12:
            p = PipelineParams(**{**params.__dict__, "alpha": 1 - gamma + eps / 2,
                                  "seed": child_seed(seed, 0xB1A, attempt)})
            f, log = embed_bipartite(Gb, H, lab, p)
            ok, why = verify_embedding(G, H, f)
            if not ok:
                raise InternalInvariantBroken("embedding fails in the original host: %s" % why)
            log["partition"] = {"attempt": attempt, "relative_min_degree": rel, "sizes": [n1, n - n1]}
            return f, log
    raise PartitionRejected("no bipartition reached relative minimum degree %.3f in %d tries" % (target, retries))


# ---------------------------------------------------------------- r-partite pipeline

def _families(G: PartitionedGraph, parts: Sequence[VertexSet], A: Sequence[VertexSet], delta: float,
              size: int, seed: int, delta1: float):
    """Sampled K (across A) and F (across the parts).  F is a sample, so a member of K can
    miss every sampled neighbour; such members are dropped rather than failing the step."""
    r = len(parts)
    K = sample_heavy_cliques(G, parts, (delta / 2) ** r, A, size, child_seed(seed, 1))
    F = sample_heavy_cliques(G, parts, delta ** r, None, size, child_seed(seed, 2))
    if len(F):
        degs = rho(G, K, F).degrees
        keep = [m for m, dg in zip(K.members, degs) if dg >= delta1 * len(F) - 1e-12]
        dropped = len(K) - len(keep)
        if dropped and keep:
            K.scale *= len(keep) / len(K)
        K.members = keep
    return K, F


def _rolling(G: PartitionedGraph, H: PartitionedGraph, lab: Labelling, params: PipelineParams,
             color: Sequence[int], window: Callable[[int], list[VertexSet]],
             allowed: Callable[[int], VertexSet], block_of_interval: list[int],
             intervals: list[tuple[int, int]], G_check: PartitionedGraph,
             restrict_of: Callable[[int], list[list[VertexSet]]] | None = None) -> tuple[PartialEmbedding, dict]:
    """Shared rolling loop: step t embeds ``intervals[t]`` inside the window parts ``window(t)``."""
    f = PartialEmbedding(lab)
    log: dict = {"blocks": [], "audit_failures": [], "params": params.to_json()}
    lag = params.release_lag
    A = None
    delta = params.heavy_delta if params.heavy_delta is not None else params.drc.delta
    prev_window = None
    for t, (lo, hi) in enumerate(intervals):
        t0 = time.perf_counter()
        released = f.images(range(0, t - lag + 1))
        parts = [P & ~released for P in window(t)]
        _check_release(H, lab, intervals, t, lag)
        if A is None:
            A = list(parts)
        elif prev_window is not None and window(t) != prev_window:
            A = [a & P for a, P in zip(A, parts)]
        prev_window = window(t)
        seed = child_seed(params.seed, t)
        drc = _with_seed(params.drc, seed)
        restrict = restrict_of(t) if restrict_of is not None else None
        try:
            K, F = _families(G, parts, A, delta, drc.family_size, seed, drc.delta1)
            if not len(K):
                raise SelectionFailed("no heavy clique crosses the current sets", step=t)
            out = select_rpartite(G, parts, A, K, F, drc, restrict=restrict)
            f = extend_rpartite(G, H, f, A, out.T, (lo, hi), color=color, allowed=allowed,
                                block=t)
        except (SelectionFailed, ExtensionStuck, PreconditionViolated) as exc:
            raise _fail(t, exc, f, log["blocks"]) from exc
        entry = {"step": t, "block": block_of_interval[t], "labels": [lo + 1, hi],
                 "residual": [P.bit_count() for P in parts], "A": [a.bit_count() for a in A],
                 "families": [len(K), len(F)], "drc": _compact(out), "seconds": time.perf_counter() - t0}
        if params.audit:
            bad = recheck_outcome(G, out)
            entry["audit"] = bad
            if bad:
                log["audit_failures"].append({"step": t, "ids": bad})
        log["blocks"].append(entry)
        keep_out = f.images(range(max(0, t - lag + 1), t))
        A = [b & ~keep_out for b in out.B]
    ok, why = verify_embedding(G_check, H, f, allowed)
    if not ok:
        raise InternalInvariantBroken("pipeline produced an invalid embedding: %s" % why)
    return f, log


def embed_rpartite(G: PartitionedGraph, H: PartitionedGraph, lab: Labelling, params: PipelineParams, *,
                   color: Sequence[int] | None = None) -> tuple[PartialEmbedding, dict]:
    """Embed H with colour classes W_j (``color`` or H.part_of) into the parts V_j of G."""
    r = len(G.parts)
    if r < 2:
        raise PreconditionViolated("G needs at least two parts")
    color = list(H.part_of if color is None else color)
    sizes = [0] * r
    for v in range(H.n):
        if not 0 <= color[v] < r:
            raise PreconditionViolated("vertex %d has colour %d outside [0, %d)" % (v, color[v], r))
        sizes[color[v]] += 1
    for j in range(r):
        if sizes[j] > (1 - params.alpha) * G.parts[j].bit_count() + 1e-9:
            raise PreconditionViolated("colour class %d has %d vertices, part holds %d" % (j, sizes[j],
                                                                                       G.parts[j].bit_count()))
    if any(color[u] == color[v] for u, v in H.edges()):
        raise PreconditionViolated("colouring of H is not proper")
    _check_labelling(H, lab, params.d, params.beta)
    if H.n == 0:
        return PartialEmbedding(lab), {"blocks": [], "audit_failures": [], "params": params.to_json()}
    intervals = _intervals(H.n, params.block or params.beta)
    parts = list(G.parts)
    return _rolling(G, H, lab, params, color, lambda t: parts, lambda v: parts[color[v]],
                    [0] * len(intervals), intervals, G)


# ---------------------------------------------------------------- backbone pipeline

def embed_via_backbone(G: PartitionedGraph, backbone, H: PartitionedGraph, lab: Labelling, coloring,
                       params: PipelineParams, *, eps: float = 0.0) -> tuple[PartialEmbedding, dict]:
    """Embed H, coloured by a block colouring with k blocks, into a backbone with >= k rows.

    ``backbone.parts[i][j]`` is V_{i,j}; the last colour is the special one.
    Vertices of block i and colour j go to V_{i,j}.  Windows are pairs of
    consecutive rows; the DRC runs on a scratch copy of G in which
    V_{i,j}-V_{i+1,j} and the special column's cross-row pairs are complete.
    The result is checked against the original G.
    """
    rows = [list(r) for r in backbone.parts]
    c = len(rows[0]) if rows else 0
    k = len(coloring.blocks)
    if k > len(rows):
        raise PreconditionViolated("H has %d blocks but the backbone only %d rows" % (k, len(rows)))
    if coloring.colors != c:
        raise PreconditionViolated("H uses %d colours, the backbone has %d columns" % (coloring.colors, c))
    _check_labelling(H, lab, params.d, params.beta)
    problems = coloring.problems(H, lab, params.beta)
    if problems:
        raise PreconditionViolated("block colouring fails: %s" % "; ".join(problems))
    col = coloring.coloring
    block_of = coloring.block_of(lab)
    counts = [[0] * c for _ in range(k)]
    for v in range(H.n):
        counts[block_of[v]][col[v]] += 1
    for i in range(k):
        for j in range(c):
            if counts[i][j] > (1 - eps) * rows[i][j].bit_count() + 1e-9:
                raise PreconditionViolated("W_{%d,%d} has %d vertices, V_{%d,%d} holds %d"
                                           % (i, j, counts[i][j], i, j, rows[i][j].bit_count()))
    special = c - 1
    extra = []
    for i in range(min(k, len(rows)) - 1 + (1 if k < len(rows) else 0)):
        if i + 1 >= len(rows):
            break
        for j in range(c):
            extra.append((rows[i][j], rows[i + 1][j]))
            if j != special:
                extra.append((rows[i][special], rows[i + 1][j]))
                extra.append((rows[i + 1][special], rows[i][j]))
    Go = G.with_edges(extra)
    # inner intervals of length beta that never straddle a block boundary
    intervals, owner = [], []
    for i, (lo, hi) in enumerate(coloring.blocks):
        for a in range(lo, hi, params.block or params.beta):
            intervals.append((a, min(a + (params.block or params.beta), hi)))
            owner.append(i)
    first = [t == 0 or owner[t] != owner[t - 1] for t in range(len(intervals))]

    def pair(t: int) -> tuple[int, int]:
        b = owner[t]
        if first[t] and b > 0:
            return b - 1, b
        return b, b + 1

    def window(t: int) -> list[VertexSet]:
        a, b = pair(t)
        return [rows[a][j] | (rows[b][j] if b < len(rows) else 0) for j in range(c)]

    def restrict_of(t: int) -> list[list[VertexSet]]:
        b = owner[t]
        present = set()
        for label in range(intervals[t][0] + 1, intervals[t][1] + 1):
            present.add(col[lab.vertex(label)])
        return [[rows[b][j]] if j in present else [] for j in range(c)]

    def allowed(v: int) -> VertexSet:
        return rows[block_of[v]][col[v]]

    f, log = _rolling(Go, H, lab, params, col, window, allowed, owner, intervals, G, restrict_of)
    log["overlay_pairs"] = len(extra)
    return f, log
