"""Experiment runner: named pipelines over seed ranges, one report per seed.

A spec is a JSON object::

    {"schema": 1, "name": "...", "pipeline": "bipartite", "seeds": [0, 50],
     "generator": {...}, "params": {...}}

``seeds`` is either ``[start, count]`` or ``{"list": [...]}``.  Every run
is a pure function of (spec, seed); the report hash covers everything but
timings, so replays can be compared directly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import statistics
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

from .config import child_seed
from .drc import DrcParams
from .embedder import (PipelineParams, embed_bipartite, embed_min_degree_bipartite, embed_rpartite,
                       embed_via_backbone, verify_embedding)
from .errors import PreconditionViolated, WeaveError
from .generators import (gen_degenerate_bandwidth_H, gen_dense_rpartite_G, gen_min_degree_G,
                         gen_planted_backbone_G, gen_two_colored_Kn)
from .graph import verify_labelling
from .labelling import locality_bound, relabel_degenerate_local
from .structures import RamseyParams, balanced_recolor, find_backbone_min_degree, ramsey_pipeline

SCHEMA_VERSION = 1
TIMING_KEYS = ("wall_time", "seconds")


class SpecError(PreconditionViolated):
    pass


@dataclass
class RunReport:
    schema: int
    spec_hash: str
    pipeline: str
    seed: int
    success: bool
    error: str | None
    cause: str | None
    wall_time: float
    verified: bool
    audit_failures: list = field(default_factory=list)
    certificates: list = field(default_factory=list)  # per block: (attempts, {property: (checked, result)})
    residual_trace: list = field(default_factory=list)
    embedding_hash: str | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    @property
    def hash(self) -> str:
        return stable_hash(_strip_timing(self.to_json()))


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def stable_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()[:16]


# ---------------------------------------------------------------- spec handling

PIPELINES = ("bipartite", "rpartite", "min_degree", "backbone", "ramsey", "relabel")


def validate_spec(spec: dict) -> dict:
    if not isinstance(spec, dict):
        raise SpecError("spec must be a JSON object")
    if spec.get("schema") != SCHEMA_VERSION:
        raise SpecError("spec schema must be %d, got %r" % (SCHEMA_VERSION, spec.get("schema")))
    if spec.get("pipeline") not in PIPELINES:
        raise SpecError("pipeline must be one of %s" % (PIPELINES,))
    seeds_of(spec)
    for key in ("generator", "params"):
        if not isinstance(spec.get(key, {}), dict):
            raise SpecError("%s must be an object" % key)
    return spec


def seeds_of(spec: dict) -> list[int]:
    s = spec.get("seeds", [0, 1])
    if isinstance(s, dict) and isinstance(s.get("list"), list):
        return [int(x) for x in s["list"]]
    if isinstance(s, list) and len(s) == 2 and all(isinstance(x, int) for x in s) and s[1] >= 0:
        return list(range(s[0], s[0] + s[1]))
    raise SpecError("seeds must be [start, count] or {\"list\": [...]}")


def load_spec(path: str | Path) -> dict:
    with open(path) as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError("spec is not valid JSON: %s" % exc) from exc
    return validate_spec(spec)


# ---------------------------------------------------------------- presets

def _drc(**kw) -> dict:
    return DrcParams(**kw).to_json()


PRESETS: dict[str, dict] = {
    "bipartite": {
        "schema": 1, "name": "bipartite-n1000", "pipeline": "bipartite", "seeds": [0, 50],
        "generator": {"n": 1000, "p": 0.5, "m": 800, "d": 2, "bandwidth": 30},
        "params": {"d": 2, "beta": 30, "drc": _drc(s=1, lam=4.0, beta=10, d=2, delta=0.4)},
    },
    "tripartite": {
        "schema": 1, "name": "tripartite-n300", "pipeline": "rpartite", "seeds": [0, 50],
        "generator": {"r": 3, "n": 300, "p": 0.6, "m": 240, "d": 2, "bandwidth": 12},
        "params": {"d": 2, "beta": 12, "drc": _drc(s=1, lam=4.0, beta=2, d=2, delta=0.6,
                                                     delta1=(0.6 ** 2 / 2) ** 9, max_retries=20)},
    },
    "min_degree": {
        "schema": 1, "name": "min-degree-n800", "pipeline": "min_degree", "seeds": [0, 10],
        "generator": {"n": 800, "gamma": 0.55, "p": 0.6, "m": 200, "d": 2, "bandwidth": 20},
        "params": {"d": 2, "beta": 20, "eps": 0.1, "drc": _drc(s=1, lam=4.0, beta=4, d=2, delta=0.4)},
    },
    "ramsey": {
        "schema": 1, "name": "ramsey-planted", "pipeline": "ramsey", "seeds": [0, 30],
        "generator": {"t": 14, "q": 180, "r": 2, "xi": 30, "d": 2, "bandwidth": 2},
        "params": {"r": 2, "d": 2, "beta": 2, "eps": 0.5, "sub_len": 30, "recolor_eps": 0.9, "trials": 200,
                   "pipeline": {"drc": _drc(s=1, lam=4.0, beta=2, d=2, delta=0.85, delta1=1e-9, max_retries=20)}},
    },
    "backbone": {
        "schema": 1, "name": "planted-backbone", "pipeline": "backbone", "seeds": [0, 10],
        "generator": {"k": 5, "r": 2, "q": 150, "p_lo": 0.01, "xi": 40, "d": 2, "bandwidth": 2},
        "params": {"eps": 0.4, "delta": 0.05, "reservoir_frac": 0.1, "balance_eps": 0.6, "sub_len": 40, "recolor_eps": 0.6,
                   "trials": 200, "d": 2, "beta": 2,
                   "drc": _drc(s=1, lam=4.0, beta=2, d=2, delta=0.9, delta1=1e-9, max_retries=20)},
    },
    "relabel": {
        "schema": 1, "name": "relabel-small", "pipeline": "relabel", "seeds": [0, 200],
        "generator": {"n": 300, "d": 3, "bandwidth": 8, "r": 2},
        "params": {},
    },
}


def preset(name: str, **overrides) -> dict:
    if name not in PRESETS:
        raise SpecError("unknown preset %r; known: %s" % (name, sorted(PRESETS)))
    spec = json.loads(json.dumps(PRESETS[name]))
    spec.update(overrides)
    return validate_spec(spec)


# ---------------------------------------------------------------- single runs

def _summarise_log(log: dict) -> tuple[list, list]:
    certs, trace = [], []
    for entry in log.get("blocks", []):
        drc = entry.get("drc", {})
        certs.append({"attempts": drc.get("attempts"),
                      "properties": {e["id"]: [e["checked"], e["result"]] for e in drc.get("certificate", [])}})
        trace.append(entry.get("residual"))
    return certs, trace


def _h(gen: dict, seed: int, r: int):
    return gen_degenerate_bandwidth_H(gen["m"], gen["d"], gen["bandwidth"], r, child_seed(seed, 0x4))


def _run_bipartite(spec, seed):
    g = spec["generator"]
    G = gen_dense_rpartite_G([g["n"], g["n"]], g["p"], child_seed(seed, 0x6))
    H, lab, _ = _h(g, seed, 2)
    params = PipelineParams.from_json({**spec["params"], "seed": seed})
    f, log = embed_bipartite(G, H, lab, params)
    return G, H, f, log, {}


def _run_rpartite(spec, seed):
    g = spec["generator"]
    G = gen_dense_rpartite_G([g["n"]] * g["r"], g["p"], child_seed(seed, 0x6))
    H, lab, _ = _h(g, seed, g["r"])
    params = PipelineParams.from_json({**spec["params"], "seed": seed})
    f, log = embed_rpartite(G, H, lab, params)
    return G, H, f, log, {}


def _run_min_degree(spec, seed):
    g = spec["generator"]
    P = dict(spec["params"])
    eps = P.pop("eps")
    G = gen_min_degree_G(g["n"], g["gamma"], child_seed(seed, 0x6), p=g.get("p"))
    H, lab, _ = _h(g, seed, 2)
    params = PipelineParams.from_json({**P, "seed": seed})
    f, log = embed_min_degree_bipartite(G, H, lab, g["gamma"], eps, seed, params)
    return G, H, f, log, {"partition": log.get("partition")}


def _run_backbone(spec, seed):
    g, P = spec["generator"], dict(spec["params"])
    G = gen_planted_backbone_G(g["k"], g["r"], g["q"], child_seed(seed, 0x6), p_hi=g.get("p_hi", 0.9),
                               p_lo=g.get("p_lo", 0.05))
    bb = find_backbone_min_degree(G, g["r"], P.pop("eps"), P.pop("delta"), g["k"] - 1, seed=seed,
                                  reservoir_frac=P.pop("reservoir_frac", None))
    m = g["xi"] * bb.k
    H, lab, col = gen_degenerate_bandwidth_H(m, g["d"], g["bandwidth"], g["r"], child_seed(seed, 0x4))
    bc = balanced_recolor(H, lab, col, bb.k, P.pop("balance_eps"), child_seed(seed, 0x8C), P.pop("trials"),
                          beta=g["bandwidth"], sub_len=P.pop("sub_len"), recolor_eps=P.pop("recolor_eps"), r=g["r"])
    params = PipelineParams.from_json({**P, "seed": seed})
    f, log = embed_via_backbone(G, bb, H, lab, bc, params)
    return G, H, f, log, {"backbone_rows": bb.k, "backbone_ok": bb.certificate.get("ok")}


def _run_ramsey(spec, seed):
    g = spec["generator"]
    red = gen_two_colored_Kn(g["t"], g["q"], g["r"], child_seed(seed, 0x6))
    rows = g["t"] - g["r"]
    H, lab, col = gen_degenerate_bandwidth_H(g["xi"] * rows, g["d"], g["bandwidth"], g["r"], child_seed(seed, 0x4))
    params = RamseyParams(**{**spec["params"], "seed": seed})
    f, colour, rep = ramsey_pipeline(red, H, lab, col, params)
    host = red if colour == "red" else red.complement()
    log = {"blocks": [], "audit_failures": rep["embed"]["audit_failures"]}
    return host, H, f, log, {"colour": colour, "k": rep["path_power"]["k"], "colour_audit": rep["colour_audit"]}


def _run_relabel(spec, seed):
    g = spec["generator"]
    H, sigma, _ = gen_degenerate_bandwidth_H(g["n"], g["d"], g["bandwidth"], g["r"], seed, priority="random")
    t0 = time.perf_counter()
    pi, _ = relabel_degenerate_local(H, sigma, g["d"], g["bandwidth"])
    rep = verify_labelling(H, pi, 5 * g["d"], locality_bound(g["bandwidth"]))
    return None, H, None, {"blocks": [], "audit_failures": []}, {"labelling_ok": rep.ok,
                                                                "seconds": time.perf_counter() - t0,
                                                                "back_degree": rep.worst_back_degree,
                                                                "stretch": rep.worst_stretch}


RUNNERS: dict[str, Callable] = {"bipartite": _run_bipartite, "rpartite": _run_rpartite,
                                "min_degree": _run_min_degree, "backbone": _run_backbone,
                                "ramsey": _run_ramsey, "relabel": _run_relabel}


def run_one(spec: dict, seed: int) -> RunReport:
    """Run one seed; failures are recorded, never raised."""
    spec_hash = stable_hash(spec)
    t0 = time.perf_counter()
    try:
        G, H, f, log, extra = RUNNERS[spec["pipeline"]](spec, seed)
    except WeaveError as exc:
        details = getattr(exc, "details", {})
        return RunReport(SCHEMA_VERSION, spec_hash, spec["pipeline"], seed, False, str(exc)[:500],
                         details.get("cause", type(exc).__name__), time.perf_counter() - t0, False,
                         extra={"block": details.get("block"), "stage": details.get("stage")})
    wall = time.perf_counter() - t0
    if f is None:
        ok = bool(extra.get("labelling_ok"))
        return RunReport(SCHEMA_VERSION, spec_hash, spec["pipeline"], seed, ok, None, None, wall, ok, extra=extra)
    verified, why = verify_embedding(G, H, f)
    certs, trace = _summarise_log(log)
    emb = stable_hash(sorted(f.map.items()))
    return RunReport(SCHEMA_VERSION, spec_hash, spec["pipeline"], seed, verified, why, None, wall, verified,
                     log.get("audit_failures", []), certs, trace, emb, extra)


def _atomic_write(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    os.replace(tmp, path)


def summarise(reports: list[RunReport]) -> dict:
    n = len(reports)
    if not n:
        return {"runs": 0, "successes": 0, "rate": None, "median_wall": None, "audit_failures": 0,
                "unverified_embeddings": 0, "causes": {}}
    causes: dict[str, int] = {}
    for r in reports:
        if not r.success:
            causes[r.cause or "invalid"] = causes.get(r.cause or "invalid", 0) + 1
    walls = [r.wall_time for r in reports]
    return {"runs": n, "successes": sum(r.success for r in reports),
            "rate": sum(r.success for r in reports) / n,
            "median_wall": statistics.median(walls), "max_wall": max(walls),
            "audit_failures": sum(len(r.audit_failures) for r in reports),
            "unverified_embeddings": sum(1 for r in reports if r.embedding_hash and not r.verified),
            "causes": causes}


def run_experiment(spec: dict | str | Path, *, out_dir: str | Path | None = None, threads: int = 1,
                   seeds: list[int] | None = None) -> tuple[list[RunReport], dict]:
    """Run every seed of ``spec``; write ``seed-<n>.json``, ``summary.json`` and ``summary.csv`` to
    ``out_dir`` when given."""
    spec = load_spec(spec) if isinstance(spec, (str, Path)) else validate_spec(spec)
    seeds = seeds_of(spec) if seeds is None else list(seeds)
    if threads > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(run_one, [spec] * len(seeds), seeds))
    else:
        reports = [run_one(spec, s) for s in seeds]
    summary = {"schema": SCHEMA_VERSION, "name": spec.get("name"), "pipeline": spec["pipeline"],
               "spec_hash": stable_hash(spec), **summarise(reports)}
    if out_dir is not None:
        out = Path(out_dir)
        for r in reports:
            _atomic_write(out / ("seed-%d.json" % r.seed), r.to_json() | {"hash": r.hash})
        _atomic_write(out / "summary.json", summary)
        write_csv(out / "summary.csv", reports)
    return reports, summary


CSV_FIELDS = ("seed", "success", "verified", "cause", "wall_time", "blocks", "audit_failures", "hash")


def write_csv(path: str | Path, reports: list[RunReport]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for r in reports:
            w.writerow([r.seed, int(r.success), int(r.verified), r.cause or "", "%.4f" % r.wall_time,
                        len(r.certificates), len(r.audit_failures), r.hash])
