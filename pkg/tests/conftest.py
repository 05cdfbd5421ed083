import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from weave.graph import PartitionedGraph

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def gnp(n, p, seed, parts=None):
    """Plain G(n, p) straight from numpy, independent of the package generators."""
    rng = np.random.default_rng(seed)
    M = np.triu(rng.random((n, n)) < p, 1)
    M = M | M.T
    edges = [(int(u), int(v)) for u, v in zip(*np.nonzero(np.triu(M, 1)))]
    return PartitionedGraph.from_edges(n, edges, parts)


def bipartite_gnp(a, b, p, seed):
    rng = np.random.default_rng(seed)
    edges = [(u, a + v) for u in range(a) for v in range(b) if rng.random() < p]
    return PartitionedGraph.from_edges(a + b, edges, [range(a), range(a, a + b)], strict=True)


def complete_multipartite(sizes):
    offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    parts = [list(range(offs[i], offs[i + 1])) for i in range(len(sizes))]
    edges = [(u, v) for i in range(len(parts)) for j in range(i + 1, len(parts))
             for u in parts[i] for v in parts[j]]
    return PartitionedGraph.from_edges(int(offs[-1]), edges, parts, strict=True)


@pytest.fixture
def k33():
    return complete_multipartite([3, 3])


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    line = "criterion %2d %s  %s" % (number, "PASS" if ok else "FAIL", detail)
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
