import math

import pytest
from hypothesis import given, settings, strategies as st

from weave.drc import (EXACT, SAMPLED, SKIPPED, DrcParams, check_negligible_potential_bounds, dyadic_bucket,
                       is_typical, log2_theta, paper_schedule, recheck_outcome, sample_neighborhood_set,
                       select_bipartite, select_rpartite)
from weave.errors import InfeasibleParams, PreconditionViolated, SelectionFailed
from weave.generators import gen_dense_rpartite_G
from weave.graph import PartitionedGraph, common_neighbors, full, members, vset
from weave.potentials import (CrossingFamily, all_subsets_common, brute_potential, heavy_cliques, potential, rho,
                              sample_heavy_cliques)

from conftest import complete_multipartite


# ---------------------------------------------------------------- sampling

def test_sample_single_vertex_pool():
    G = complete_multipartite([3, 4])
    T, N = sample_neighborhood_set(G, vset([1]), 3, 0)
    assert T == (1, 1, 1)
    assert N == G.adj[1]


def test_sample_complete_bipartite_covers_right():
    G = complete_multipartite([5, 5])
    T, N = sample_neighborhood_set(G, G.parts[0], 4, 7)
    assert all(G.parts[0] >> v & 1 for v in T)
    assert N & G.parts[1] == G.parts[1]


def test_sample_golden_seed():
    G = gen_dense_rpartite_G([20, 20], 0.5, 1)
    T, N = sample_neighborhood_set(G, G.parts[0], 4, 123)
    assert T == (3, 17, 11, 3)
    assert N == common_neighbors(G, T, full(40))


def test_sample_empty_pool():
    with pytest.raises(PreconditionViolated):
        sample_neighborhood_set(complete_multipartite([2, 2]), 0, 1, 0)


# ---------------------------------------------------------------- parameters

def test_paper_schedule_refuses_small_n():
    with pytest.raises(InfeasibleParams) as ei:
        paper_schedule("bipartite", 1000, 2, 0.5, 0.5)
    assert ei.value.details["beta"] < 1
    with pytest.raises(InfeasibleParams):
        paper_schedule("rpartite", 10**6, 2, 0.5, 0.5, r=3, eps=0.1)


def test_paper_schedule_formulas_reported():
    with pytest.raises(InfeasibleParams) as ei:
        paper_schedule("bipartite", 10**6, 3, 0.8, 0.5)
    c = ei.value.details
    s = math.sqrt(3 * math.log(10**6) / math.log(2 / 0.8))
    assert c["s"] == pytest.approx(s)
    assert c["lambda"] == pytest.approx((0.4) ** (5 * s) * 10**6)


def test_params_json_roundtrip():
    p = DrcParams(s=2, lam=3.0, beta=4, require=("sizes",))
    q = DrcParams.from_json(p.to_json() | {"unknown": 1})
    assert q == p


def test_params_reject_bad_s():
    with pytest.raises(InfeasibleParams):
        DrcParams(s=0)


# ---------------------------------------------------------------- bipartite selection

def test_bipartite_complete_host_all_pass():
    G = complete_multipartite([12, 12])
    V1, V2 = G.parts
    out = select_bipartite(G, V1, V2, V1, V2, DrcParams(s=2, lam=4, beta=3, d=2, delta=0.5))
    assert out.B == (V1, V2)
    for e in out.certificate.entries:
        assert e["result"] is True, e
    assert recheck_outcome(G, out) == []


def test_bipartite_random_host_certificate_reverifies():
    G = gen_dense_rpartite_G([800, 800], 0.5, 5)
    V1, V2 = G.parts
    params = DrcParams(s=2, lam=4, beta=40, d=2, delta=0.4, require=("sizes",))
    out = select_bipartite(G, V1, V2, V1, V2, params)
    B1, B2 = out.B
    assert B1 == common_neighbors(G, out.T[1], V1) and B2 == common_neighbors(G, out.T[0], V2)
    cert = out.certificate
    assert cert.get("i")["checked"] == EXACT
    assert cert.get("i")["result"] == all_subsets_common(G, B1, V2 & B2, 2, 80)
    assert cert.get("iv")["checked"] == EXACT
    assert cert.get("iv")["result"] == all_subsets_common(G, V2, V1 & B1, 2, 40)
    ii = cert.get("ii")
    assert ii["checked"] in (EXACT, SAMPLED)
    # the sampled estimate of the (s, d, 2 beta)-potential sits within a few standard errors of the truth
    pc = potential(G, B2, B1, 2, 2, 80, ("sampled", 4000, 11))
    if ii["checked"] == SAMPLED:
        assert abs(ii["estimate"] - pc.estimate) <= 5 * (ii["stderr"] + pc.stderr) + 1e-9
    assert recheck_outcome(G, out) == []


def test_bipartite_adversarial_host_never_certifies():
    # left and right each split in halves, edges only within matching halves: relative degree 1/2
    n = 20
    edges = [(u, n + v) for u in range(n) for v in range(n) if (u < n // 2) == (v < n // 2)]
    G = PartitionedGraph.from_edges(2 * n, edges, [range(n), range(n, 2 * n)], strict=True)
    V1, V2 = G.parts
    with pytest.raises((PreconditionViolated, SelectionFailed)):
        select_bipartite(G, V1, V2, V1, V2, DrcParams(s=1, lam=2, beta=2, d=2, delta=0.6))


def test_bipartite_selection_failure_carries_best():
    G = gen_dense_rpartite_G([40, 40], 0.3, 2)
    V1, V2 = G.parts
    with pytest.raises(SelectionFailed) as ei:
        select_bipartite(G, V1, V2, V1, V2, DrcParams(s=3, lam=2, beta=30, d=2, delta=0.2, max_retries=3))
    assert ei.value.details["failing"]


@settings(max_examples=15)
@given(st.integers(0, 10**6), st.sampled_from(["objective", "rejection"]), st.integers(1, 2))
def test_bipartite_invariants(seed, mode, s):
    G = gen_dense_rpartite_G([60, 60], 0.6, seed)
    V1, V2 = G.parts
    params = DrcParams(s=s, lam=4, beta=2, d=2, delta=0.4, mode=mode, candidates=4, seed=seed,
                       require=("sizes",))
    out = select_bipartite(G, V1, V2, V1, V2, params)
    again = select_bipartite(G, V1, V2, V1, V2, params)
    assert out.T == again.T and out.B == again.B
    assert recheck_outcome(G, out) == []
    assert out.B[0] == common_neighbors(G, out.T[1], V1)
    assert out.B[1] == common_neighbors(G, out.T[0], V2)
    if mode == "objective":
        r1, r2 = out.objective_values
        assert r1["values"][r1["picked"]] == max(r1["values"])
        assert r2["values"][r2["picked"]] == min(r2["values"])


# ---------------------------------------------------------------- typicality

def test_is_typical_complete():
    G = complete_multipartite([5, 5, 5])
    A = list(G.parts)
    T = [(0,), (5,), (10,)]
    assert is_typical(G, T, A, 2, 5 - 1) == (True, None)


def test_is_typical_witness():
    G = complete_multipartite([3, 3, 3])
    adj = list(G.adj)
    # vertex 0 loses every edge into part 2
    for v in (6, 7, 8):
        adj[0] &= ~(1 << v)
        adj[v] &= ~1
    G = PartitionedGraph(9, adj, G.parts)
    ok, wit = is_typical(G, [(), (), ()], list(G.parts), 1, 1)
    assert not ok
    assert wit == (2, (0,))


def brute_typical(G, T, A, d, beta):
    from itertools import combinations
    r = len(A)
    for i in range(r):
        X = []
        for j in range(r):
            if j != i:
                X += members(A[j])
        tgt = A[i]
        for j, t in enumerate(T):
            if j != i:
                for v in t:
                    tgt &= G.adj[v]
        for Q in combinations(X, min(d, len(X))):
            c = tgt
            for v in Q:
                c &= G.adj[v]
            if c.bit_count() < beta:
                return False
    return True


@given(st.integers(0, 10**6), st.integers(1, 2), st.integers(0, 4))
def test_is_typical_matches_brute(seed, d, beta):
    G = gen_dense_rpartite_G([5, 5, 5], 0.7, seed)
    A = list(G.parts)
    T = [(members(A[0])[seed % 5],), (), (members(A[2])[0],)]
    assert is_typical(G, T, A, d, beta)[0] == brute_typical(G, T, A, d, beta)


# ---------------------------------------------------------------- r-partite selection

def test_dyadic_bucket():
    i0, idx = dyadic_bucket([1, 2, 3, 8, 9, 0], 0.0)
    # buckets: 1 -> 1, 2 and 3 -> 2, 8 and 9 -> 4; bucket 4 carries the most edges
    assert i0 == 4 and idx == [3, 4]
    assert dyadic_bucket([0, 0], 0.0) == (None, [])
    assert dyadic_bucket([2, 2, 4], 0.0)[0] == 2  # weights 4 and 4 tie, smallest index wins


def test_log2_theta_is_finite_log():
    p = DrcParams(s=1, delta1=0.5)
    assert log2_theta(p, 100, 0) == pytest.approx(math.log2(0.5 / math.log(100) ** 2))
    assert math.isfinite(log2_theta(p, 100, 3))


def test_rpartite_complete_host_all_pass():
    G = complete_multipartite([6, 6, 6])
    parts = list(G.parts)
    K = heavy_cliques(G, parts, 0.5)
    F = heavy_cliques(G, parts, 1.0)
    out = select_rpartite(G, parts, parts, K, F, DrcParams(s=1, lam=4, beta=2, d=2, delta=0.5, delta1=0.5))
    assert out.B == tuple(parts)
    for pid in ("sizes", "a", "iii", "i_common", "b"):
        assert out.certificate.passed(pid), pid
    assert recheck_outcome(G, out) == []


def test_rpartite_empty_K():
    G = complete_multipartite([3, 3, 3])
    parts = list(G.parts)
    with pytest.raises(PreconditionViolated):
        select_rpartite(G, parts, parts, CrossingFamily("K", tuple(parts), []), None, DrcParams())


def test_rpartite_non_heavy_K_rejected():
    G = gen_dense_rpartite_G([10, 10, 10], 0.5, 3)
    parts = list(G.parts)
    K = heavy_cliques(G, parts, 0.0)
    F = heavy_cliques(G, parts, 0.0)
    with pytest.raises(PreconditionViolated):
        select_rpartite(G, parts, parts, K, F, DrcParams(delta1=1.0))


def heavy_part(G, K, F):
    """Members of K adjacent to at least one member of F (a sampled F can miss some)."""
    degs = rho(G, K, F).degrees
    return CrossingFamily("K", K.parts, [m for m, dg in zip(K.members, degs) if dg > 0])


def test_rpartite_planted_certificate_reverifies():
    G = gen_dense_rpartite_G([300, 300, 300], 0.6, 1)
    parts = list(G.parts)
    K = sample_heavy_cliques(G, parts, 0.3 ** 3, None, 48, 1)
    F = sample_heavy_cliques(G, parts, 0.6 ** 3, None, 48, 2)
    K = heavy_part(G, K, F)
    params = DrcParams(s=1, lam=4, beta=2, d=2, delta=0.6, delta1=1e-9, max_retries=20)
    out = select_rpartite(G, parts, parts, K, F, params)
    cert = out.certificate
    assert cert.get("iii")["checked"] == EXACT and cert.passed("iii")
    assert brute_typical(G, out.T, parts, 2, 2)
    assert cert.get("i_common")["checked"] in (EXACT, SKIPPED)
    assert recheck_outcome(G, out) == []
    for i, (Vi, Bi) in enumerate(zip(parts, out.B)):
        others = [v for j, t in enumerate(out.T) if j != i for v in t]
        assert Bi == common_neighbors(G, others, Vi)


def test_rpartite_typicality_rate_on_planted_hosts():
    """Selections are typical on at least 95% of 50 planted hosts whose input potentials are negligible."""
    hypothesis_held, typical = 0, 0
    for seed in range(50):
        G = gen_dense_rpartite_G([300, 300, 300], 0.6, seed)
        parts = list(G.parts)
        neg = True
        for i in range(3):
            rest = sum(parts) - parts[i]
            pc = potential(G, rest, parts[i], 2, 2, 4, ("sampled", 2000, 7 * seed + i))
            neg = neg and pc.estimate + 3 * pc.stderr < 4.0
        if not neg:
            continue
        hypothesis_held += 1
        K = sample_heavy_cliques(G, parts, 0.3 ** 3, None, 48, seed)
        F = sample_heavy_cliques(G, parts, 0.6 ** 3, None, 48, seed + 1)
        params = DrcParams(s=1, lam=4, beta=2, d=2, delta=0.6, delta1=1e-9, max_retries=20, seed=seed,
                           require=("sizes",))
        try:
            out = select_rpartite(G, parts, parts, heavy_part(G, K, F), F, params)
        except SelectionFailed:
            continue
        typical += is_typical(G, out.T, parts, 2, 2)[0]
    assert hypothesis_held >= 1
    assert typical >= 0.95 * hypothesis_held


@settings(max_examples=10)
@given(st.integers(0, 10**6), st.sampled_from(["objective", "rejection"]))
def test_rpartite_determinism_and_soundness(seed, mode):
    G = gen_dense_rpartite_G([25, 25, 25], 0.7, seed)
    parts = list(G.parts)
    K = sample_heavy_cliques(G, parts, 0.2, None, 30, seed)
    F = sample_heavy_cliques(G, parts, 0.4, None, 30, seed + 1)
    K = heavy_part(G, K, F)
    if not len(K) or not len(F):
        return
    params = DrcParams(s=1, lam=4, beta=1, d=2, delta=0.7, delta1=1e-9, mode=mode, candidates=3, seed=seed,
                       require=("sizes",))
    try:
        out = select_rpartite(G, parts, parts, K, F, params)
    except SelectionFailed:
        return
    again = select_rpartite(G, parts, parts, K, F, params)
    assert out.T == again.T
    assert recheck_outcome(G, out) == []
    if mode == "objective":
        last = out.objective_values[-1]
        assert last["values"][last["picked"]] == max(last["values"])


# ---------------------------------------------------------------- expectation bounds

def test_negligible_bounds_complete_host():
    G = complete_multipartite([6, 6])
    X, Y = G.parts
    rep = check_negligible_potential_bounds(G, X, Y, X, 2, 1, 1, 3, 200, 0)
    assert rep["i"]["mean"] == 0 and rep["ii"]["mean"] == 0
    assert rep["i"]["holds"] and rep["ii"]["holds"]


def test_negligible_bounds_random_instance():
    G = gen_dense_rpartite_G([60, 60], 0.5, 9)
    X, Y = G.parts
    rep = check_negligible_potential_bounds(G, X, Y, X, 2, 1, 1, 8, 10_000, 9)
    for tag in ("i", "ii"):
        e = rep[tag]
        assert e["degenerate"] or e["mean"] <= e["bound"] * rep["reference_" + tag] + 3 * e["stderr"]
        assert e["holds"]


def test_negligible_bounds_single_vertex_subset():
    G = gen_dense_rpartite_G([10, 12], 0.5, 2)
    X, Y = G.parts
    x = members(X)[3]
    rep = check_negligible_potential_bounds(G, X, Y, 1 << x, 2, 1, 1, 2, 50, 0)
    NY = common_neighbors(G, [x, x], Y)
    assert rep["i"]["mean"] == rep["i"]["exact_mean"] == brute_potential(G, NY, X, 1, 1, 2)
    assert rep["ii"]["mean"] == rep["ii"]["exact_mean"] == brute_potential(G, X, NY, 1, 1, 2)
    assert rep["i"]["stderr"] == 0


def test_negligible_bounds_rejects_foreign_subset():
    G = complete_multipartite([3, 3])
    with pytest.raises(PreconditionViolated):
        check_negligible_potential_bounds(G, G.parts[0], G.parts[1], G.parts[1], 1, 0, 1, 1, 10, 0)
