"""Turn a β-local labelling of a d-degenerate graph into one that is both
5d-degenerate and β⌈log₂(4β)⌉-local.

The new labels are handed out from the top down.  At each step the
remaining vertex with the largest old label among those having at most
5d remaining lower-labelled neighbours receives the largest free label.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InternalInvariantBroken, PreconditionViolated
from .graph import Labelling, PartitionedGraph, certify_labelling, degeneracy_ordering, members, verify_labelling


def locality_bound(beta: int) -> int:
    """β⌈log₂(4β)⌉ as an integer (2 when β = 1)."""
    return beta * (4 * beta - 1).bit_length()


@dataclass(frozen=True)
class RelabelStep:
    t: int
    vertex: int
    back_degree: int
    sigma: int


@dataclass(frozen=True)
class RelabelTrace:
    steps: tuple[RelabelStep, ...]
    claim_check: dict[int, int]  # vertex -> sigma(v) - pi(v); diagnostic only

    def to_json(self) -> dict:
        return {
            "steps": [[s.t, s.vertex, s.back_degree, s.sigma] for s in self.steps],
            "claim_check": {str(v): x for v, x in sorted(self.claim_check.items())},
        }


def relabel_degenerate_local(H: PartitionedGraph, sigma: Labelling, d: int, beta: int) -> tuple[Labelling, RelabelTrace]:
    m = H.n
    if sigma.m != m:
        raise PreconditionViolated("labelling size %d does not match graph order %d" % (sigma.m, m))
    if not verify_labelling(H, sigma, m, beta).local_ok:
        raise PreconditionViolated("sigma is not %d-local" % beta)
    _, degen = degeneracy_ordering(H)
    if degen > d:
        raise PreconditionViolated("graph has degeneracy %d > d=%d" % (degen, d))

    cap = 5 * d
    order = sigma.order
    by_label = sigma.sequence
    # back[v]: neighbours of v that are still present and carry a smaller sigma-label
    back = [0] * m
    for u, v in H.edges():
        if order[u] < order[v]:
            back[v] += 1
        else:
            back[u] += 1

    present = [True] * m
    top = m  # largest sigma-label still present
    pi = [0] * m
    steps = []
    for t in range(m):
        while top >= 1 and not present[by_label[top - 1]]:
            top -= 1
        lab = top
        chosen = -1
        while lab >= 1:
            v = by_label[lab - 1]
            if present[v] and back[v] <= cap:
                chosen = v
                break
            lab -= 1
        if chosen < 0:
            raise InternalInvariantBroken("no vertex with at most %d back-neighbours at step %d" % (cap, t))
        steps.append(RelabelStep(t, chosen, back[chosen], order[chosen]))
        pi[chosen] = m - t
        present[chosen] = False
        for u in members(H.adj[chosen]):
            if present[u] and order[u] > order[chosen]:
                back[u] -= 1

    out = Labelling(tuple(pi))
    trace = RelabelTrace(tuple(steps), {v: order[v] - pi[v] for v in range(m)})
    try:
        out = certify_labelling(H, out, cap, locality_bound(beta))
    except PreconditionViolated as exc:
        raise InternalInvariantBroken("relabelled output fails its bounds: %s" % exc) from exc
    return out, trace
