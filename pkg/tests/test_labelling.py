import math

import pytest
from hypothesis import given, strategies as st

from weave.errors import PreconditionViolated
from weave.generators import gen_degenerate_bandwidth_H
from weave.graph import Labelling, PartitionedGraph, members, verify_labelling
from weave.labelling import locality_bound, relabel_degenerate_local

from conftest import complete_multipartite


def test_locality_bound_values():
    assert locality_bound(1) == 2
    for b in range(1, 200):
        assert locality_bound(b) == b * math.ceil(math.log2(4 * b))


def test_single_edge():
    H = PartitionedGraph.from_edges(2, [(0, 1)])
    pi, trace = relabel_degenerate_local(H, Labelling((1, 2)), 1, 1)
    assert sorted(pi.order) == [1, 2]
    assert verify_labelling(H, pi, 5, 2).ok
    assert len(trace.steps) == 2


def test_path_of_ten():
    H = PartitionedGraph.from_edges(10, [(i, i + 1) for i in range(9)])
    pi, _ = relabel_degenerate_local(H, Labelling.identity(10), 1, 1)
    assert verify_labelling(H, pi, 5, 2).ok


def test_rejects_non_local_sigma():
    H = PartitionedGraph.from_edges(4, [(0, 3)])
    with pytest.raises(PreconditionViolated):
        relabel_degenerate_local(H, Labelling.identity(4), 1, 2)


def test_rejects_too_dense():
    K4 = complete_multipartite([1, 1, 1, 1])
    with pytest.raises(PreconditionViolated):
        relabel_degenerate_local(K4, Labelling.identity(4), 2, 3)


instances = st.tuples(st.integers(1, 120), st.integers(1, 3), st.integers(1, 8), st.integers(2, 4),
                      st.integers(0, 10**6), st.sampled_from(["label", "random"]))


@given(instances)
def test_relabel_properties(inst):
    n, d, beta, r, seed, priority = inst
    H, sigma, _ = gen_degenerate_bandwidth_H(n, d, beta, r, seed, priority=priority)
    pi, trace = relabel_degenerate_local(H, sigma, d, beta)
    assert sorted(pi.order) == list(range(1, n + 1))
    rep = verify_labelling(H, pi, 5 * d, locality_bound(beta))
    assert rep.ok
    # the trace records the selection rule: every chosen vertex had at most 5d back-neighbours left
    assert len(trace.steps) == n
    assert len({s.vertex for s in trace.steps}) == n
    assert all(s.back_degree <= 5 * d for s in trace.steps)
    for s in trace.steps:
        assert pi[s.vertex] == n - s.t
        assert sigma[s.vertex] == s.sigma
    # back-degree under pi, recounted from scratch
    for v in range(n):
        assert sum(1 for u in members(H.adj[v]) if pi[u] < pi[v]) <= 5 * d


@given(instances)
def test_trace_replay_is_identical(inst):
    n, d, beta, r, seed, priority = inst
    H, sigma, _ = gen_degenerate_bandwidth_H(n, d, beta, r, seed, priority=priority)
    a = relabel_degenerate_local(H, sigma, d, beta)
    b = relabel_degenerate_local(H, sigma, d, beta)
    assert a[0] == b[0]
    assert a[1].to_json() == b[1].to_json()


def test_claim_check_recorded_not_asserted():
    H, sigma, _ = gen_degenerate_bandwidth_H(60, 2, 1, 2, 5)
    pi, trace = relabel_degenerate_local(H, sigma, 2, 1)
    assert trace.claim_check == {v: sigma[v] - pi[v] for v in range(60)}
