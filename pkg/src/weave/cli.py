"""Command-line entry point: ``weave <command> ...``.

Exit status: 0 success, 2 property refuted, 3 pipeline failed,
4 precondition violated.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import BUDGET_ENV
from .density import check_dense_pair, check_degree_dense
from .drc import DrcParams, select_bipartite, select_rpartite
from .embedder import (PipelineParams, embed_bipartite, embed_min_degree_bipartite, embed_rpartite,
                       embed_via_backbone, verify_embedding)
from .errors import PreconditionViolated, WeaveError
from .generators import (gen_degenerate_bandwidth_H, gen_dense_rpartite_G, gen_min_degree_G,
                         gen_planted_backbone_G, gen_two_colored_Kn)
from .graph import Labelling, graph_to_json, read_graph, verify_labelling, write_graph
from .labelling import relabel_degenerate_local
from .potentials import potential, sample_heavy_cliques
from .structures import (Backbone, BlockColoring, RamseyParams, balanced_recolor, find_backbone_min_degree,
                         make_Bkr, make_Pkr, ramsey_pipeline, recolor, recolor_report)

log = logging.getLogger("weave")

EXIT_OK, EXIT_REFUTED = 0, 2


def _dump(doc, path: str | None) -> None:
    text = json.dumps(doc, indent=1, sort_keys=True, default=str)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _load(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _labelled(path: str):
    doc = read_graph(path)
    lab = doc.labelling or Labelling.identity(doc.graph.n)
    color = doc.extra.get("coloring")
    if color is None:
        color = list(doc.graph.part_of)
    return doc.graph, lab, list(color)


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


# ---------------------------------------------------------------- commands

def cmd_gen(a) -> int:
    if a.kind == "H":
        H, lab, color = gen_degenerate_bandwidth_H(a.n, a.d, a.beta, a.r, a.seed, fill=a.fill, priority=a.priority)
        write_graph(a.out, H, lab, coloring=list(color), certificate=H.meta["certificate"])
    elif a.kind == "dense":
        G = gen_dense_rpartite_G(_ints(a.sizes), 0.5 if a.p is None else a.p, a.seed)
        write_graph(a.out, G, certificate=G.meta["certificate"])
    elif a.kind == "mindeg":
        G = gen_min_degree_G(a.n, a.gamma, a.seed, p=a.p)
        write_graph(a.out, G, certificate=G.meta["certificate"])
    elif a.kind == "kn":
        G = gen_two_colored_Kn(a.t, a.q, a.r, a.seed)
        write_graph(a.out, G, planted_order=G.meta["planted_order"])
    elif a.kind == "backbone-host":
        G = gen_planted_backbone_G(a.k, a.r, a.q, a.seed)
        write_graph(a.out, G, planted=G.meta["planted"])
    return EXIT_OK


def cmd_relabel(a) -> int:
    H, sigma, color = _labelled(a.h)
    pi, trace = relabel_degenerate_local(H, sigma, a.d, a.beta)
    write_graph(a.out, H, pi, coloring=color)
    if a.trace:
        _dump(trace.to_json(), a.trace)
    return EXIT_OK


def cmd_check(a) -> int:
    if a.what == "labelling":
        H, lab, _ = _labelled(a.h)
        rep = verify_labelling(H, lab, a.d, a.beta)
        _dump({"ok": rep.ok, "degenerate_ok": rep.degenerate_ok, "local_ok": rep.local_ok,
               "worst_back_degree": rep.worst_back_degree, "worst_stretch": rep.worst_stretch}, a.out)
        return EXIT_OK if rep.ok else EXIT_REFUTED
    if a.what == "embedding":
        G = read_graph(a.g).graph
        H, _, _ = _labelled(a.h)
        emb = _load(a.embedding)
        lab = read_graph(a.h).labelling or Labelling.identity(H.n)
        mapping = {lab.vertex(int(k)): v for k, v in emb["map"].items()}
        ok, why = verify_embedding(G, H, mapping)
        _dump({"ok": ok, "violation": why}, a.out)
        return EXIT_OK if ok else EXIT_REFUTED
    G = read_graph(a.g).graph
    mode = "exact" if a.mode == "exact" else ("sampled", a.trials, a.seed)
    if a.what == "dense":
        v = check_dense_pair(G, G.parts[a.x], G.parts[a.y], a.eps, a.delta, mode)
        _dump(v.to_json(), a.out)
        return EXIT_REFUTED if v.refuted else EXIT_OK
    if a.what == "degree-dense":
        v = check_degree_dense(G, a.alpha, a.eps, a.delta, mode)
        _dump(v.to_json(), a.out)
        return EXIT_REFUTED if v.refuted else EXIT_OK
    if a.what == "potential":
        pc = potential(G, G.parts[a.x], G.parts[a.y], a.p, a.d, a.beta, mode)
        _dump(pc.to_json(), a.out)
        return EXIT_OK
    raise PreconditionViolated("unknown check %r" % a.what)


def cmd_drc(a) -> int:
    G = read_graph(a.g).graph
    params = DrcParams.from_json({**_load(a.params), "seed": a.seed})
    if a.kind == "bipartite":
        V1, V2 = G.parts[:2]
        out = select_bipartite(G, V1, V2, V1, V2, params)
    else:
        parts = list(G.parts)
        K = sample_heavy_cliques(G, parts, (params.delta / 2) ** len(parts), None, params.family_size, a.seed)
        F = sample_heavy_cliques(G, parts, params.delta ** len(parts), None, params.family_size, a.seed + 1)
        out = select_rpartite(G, parts, parts, K, F, params)
    _dump(out.to_json(), a.out)
    return EXIT_OK


def cmd_embed(a) -> int:
    G = read_graph(a.g).graph
    H, lab, color = _labelled(a.h)
    cert = read_graph(a.h).extra.get("certificate", {})
    raw = _load(a.params)
    # flags win over the params file, which wins over the generator's certificate
    for key, flag in (("d", a.d), ("beta", a.beta)):
        if flag is not None:
            raw[key] = flag
        elif key not in raw and key in cert:
            raw[key] = cert[key]
    if a.kind == "min-degree":
        gamma, eps = raw.pop("gamma", a.gamma), raw.pop("eps", a.eps)
        params = PipelineParams.from_json({"seed": a.seed, **raw})
        f, run_log = embed_min_degree_bipartite(G, H, lab, gamma, eps, a.seed, params)
    else:
        params = PipelineParams.from_json({"seed": a.seed, **raw})
        if a.kind == "bipartite":
            f, run_log = embed_bipartite(G, H, lab, params)
        elif a.kind == "rpartite":
            f, run_log = embed_rpartite(G, H, lab, params, color=color)
        else:
            bb = Backbone.from_json(_load(a.backbone))
            bc_doc = _load(a.coloring)
            bc = BlockColoring(tuple(bc_doc["coloring"]), [tuple(b) for b in bc_doc["blocks"]], bc_doc["colors"])
            f, run_log = embed_via_backbone(G, bb, H, lab, bc, params)
    _dump(f.to_json(), a.out)
    if a.log:
        _dump(run_log, a.log)
    return EXIT_OK


def cmd_structures(a) -> int:
    if a.what in ("bkr", "pkr"):
        P = make_Bkr(a.k, a.r) if a.what == "bkr" else make_Pkr(a.k, a.r)
        _dump(graph_to_json(P), a.out)
    elif a.what == "backbone":
        G = read_graph(a.g).graph
        bb = find_backbone_min_degree(G, a.r, a.eps, a.delta, a.t0, seed=a.seed,
                                      reservoir_frac=a.reservoir_frac)
        _dump(bb.to_json(), a.out)
    elif a.what == "recolor":
        H, lab, color = _labelled(a.h)
        perm = _ints(a.perm)
        span = tuple(_ints(a.span)) if a.span else None
        new = recolor(H, lab, color, perm, beta=a.beta, eps=a.eps, span=span)
        _dump({"coloring": list(new),
               "report": recolor_report(H, lab, color, new, perm, beta=a.beta, eps=a.eps, span=span)}, a.out)
    elif a.what == "balanced":
        H, lab, color = _labelled(a.h)
        bc = balanced_recolor(H, lab, color, a.k, a.eps, a.seed, a.trials, beta=a.beta, sub_len=a.sub_len,
                              recolor_eps=a.recolor_eps)
        _dump(bc.to_json(), a.out)
    return EXIT_OK


def cmd_ramsey(a) -> int:
    red = read_graph(a.g).graph
    H, lab, color = _labelled(a.h)
    params = RamseyParams(**{**_load(a.params), "seed": a.seed})
    f, colour, report = ramsey_pipeline(red, H, lab, color, params)
    _dump({"colour": colour, **f.to_json()}, a.out)
    if a.log:
        _dump(report, a.log)
    return EXIT_OK


def cmd_bench(a) -> int:
    from .harness import load_spec, preset, run_experiment
    spec = load_spec(a.spec) if a.spec else preset(a.preset)
    seeds = None
    if a.seeds:
        start, count = _ints(a.seeds)
        seeds = list(range(start, start + count))
    reports, summary = run_experiment(spec, out_dir=a.out, threads=a.threads, seeds=seeds)
    if a.out and not a.no_plots:
        from .plotting import plot_batch
        plot_batch(reports, a.out, spec.get("name", ""))
    _dump(summary, None)
    return EXIT_OK if summary["runs"] == summary["successes"] else 3


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weave", description="Embedding experiments for degenerate bounded-"
                                 "bandwidth graphs via dependent random choice.")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--budget", type=int, default=None, help="enumeration cap (overrides $%s)" % BUDGET_ENV)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("kind", choices=["H", "dense", "mindeg", "kn", "backbone-host"])
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--beta", type=int, default=5)
    g.add_argument("--r", type=int, default=2)
    g.add_argument("--fill", type=float, default=1.0)
    g.add_argument("--priority", choices=["label", "random"], default="label")
    g.add_argument("--sizes", default="100,100")
    g.add_argument("--p", type=float, default=None)
    g.add_argument("--gamma", type=float, default=0.6)
    g.add_argument("--t", type=int, default=10)
    g.add_argument("--q", type=int, default=50)
    g.add_argument("--k", type=int, default=4)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("relabel", help="5d-degenerate local relabelling")
    r.add_argument("--h", required=True)
    r.add_argument("--d", type=int, required=True)
    r.add_argument("--beta", type=int, required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--trace")
    r.set_defaults(func=cmd_relabel)

    c = sub.add_parser("check", help="check a property")
    c.add_argument("what", choices=["labelling", "dense", "degree-dense", "potential", "embedding"])
    for name in ("--g", "--h", "--embedding", "--out"):
        c.add_argument(name)
    c.add_argument("--x", type=int, default=0, help="part index of X")
    c.add_argument("--y", type=int, default=1, help="part index of Y")
    c.add_argument("--d", type=int, default=2)
    c.add_argument("--p", type=int, default=0)
    c.add_argument("--beta", type=float, default=1)
    c.add_argument("--alpha", type=float, default=0.5)
    c.add_argument("--eps", type=float, default=0.25)
    c.add_argument("--delta", type=float, default=0.5)
    c.add_argument("--mode", choices=["exact", "sampled"], default="exact")
    c.add_argument("--trials", type=int, default=2000)
    c.set_defaults(func=cmd_check)

    d = sub.add_parser("drc", help="one dependent random choice selection")
    d.add_argument("kind", choices=["bipartite", "rpartite"])
    d.add_argument("--g", required=True)
    d.add_argument("--params")
    d.add_argument("--out")
    d.set_defaults(func=cmd_drc)

    e = sub.add_parser("embed", help="run an embedding pipeline")
    e.add_argument("kind", choices=["bipartite", "rpartite", "backbone", "min-degree"])
    e.add_argument("--g", required=True)
    e.add_argument("--h", required=True)
    e.add_argument("--params")
    e.add_argument("--backbone")
    e.add_argument("--coloring")
    e.add_argument("--d", type=int, default=None, help="degeneracy of the labelling")
    e.add_argument("--beta", type=int, default=None, help="locality of the labelling")
    e.add_argument("--gamma", type=float, default=0.6)
    e.add_argument("--eps", type=float, default=0.1)
    e.add_argument("--out")
    e.add_argument("--log")
    e.set_defaults(func=cmd_embed)

    s = sub.add_parser("structures", help="block structures and recolourings")
    s.add_argument("what", choices=["bkr", "pkr", "backbone", "recolor", "balanced"])
    s.add_argument("--g")
    s.add_argument("--h")
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--r", type=int, default=2)
    s.add_argument("--eps", type=float, default=0.25)
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--t0", type=int, default=2)
    s.add_argument("--reservoir-frac", type=float, default=None)
    s.add_argument("--beta", type=int, default=1)
    s.add_argument("--perm", default="1,0")
    s.add_argument("--span")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--sub-len", type=int, default=None)
    s.add_argument("--recolor-eps", type=float, default=None)
    s.add_argument("--out")
    s.set_defaults(func=cmd_structures)

    rm = sub.add_parser("ramsey", help="monochromatic embedding in a two-coloured complete graph")
    rm.add_argument("--g", required=True, help="red graph with its partition")
    rm.add_argument("--h", required=True)
    rm.add_argument("--params")
    rm.add_argument("--out")
    rm.add_argument("--log")
    rm.set_defaults(func=cmd_ramsey)

    b = sub.add_parser("bench", help="run a batch experiment")
    src = b.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec")
    src.add_argument("--preset")
    b.add_argument("--seeds", help="start,count")
    b.add_argument("--out")
    b.add_argument("--no-plots", action="store_true")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    # set through the environment so bench worker processes inherit it; restored on exit
    previous = os.environ.get(BUDGET_ENV)
    if args.budget is not None:
        os.environ[BUDGET_ENV] = str(args.budget)
    try:
        return args.func(args)
    except WeaveError as exc:
        print("%s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 4
    finally:
        if previous is None:
            os.environ.pop(BUDGET_ENV, None)
        else:
            os.environ[BUDGET_ENV] = previous


if __name__ == "__main__":
    sys.exit(main())
