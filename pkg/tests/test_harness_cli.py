import csv
import json
import math
import os
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from weave.cli import main
from weave.errors import RetryExhausted
from weave.generators import gen_degenerate_bandwidth_H, gen_dense_rpartite_G, gen_min_degree_G
from weave.graph import verify_labelling
from weave.harness import SpecError, load_spec, preset, run_experiment, run_one, summarise

DATA = Path(__file__).parent / "data"


# ---------------------------------------------------------------- generators

def test_golden_H_instance():
    doc = json.loads((DATA / "golden_H_n30_d2_b4_r3_s11.json").read_text())
    a = doc["args"]
    H, lab, col = gen_degenerate_bandwidth_H(a["n"], a["d"], a["beta"], a["r"], a["seed"])
    assert sorted(map(list, H.edges())) == doc["edges"]
    assert list(lab.order) == doc["order"]
    assert list(col) == doc["coloring"]


@given(st.integers(1, 150), st.integers(1, 4), st.integers(1, 10), st.integers(2, 5), st.integers(0, 10**6),
       st.floats(0.1, 1.0))
def test_H_passes_verifier(n, d, beta, r, seed, fill):
    H, lab, col = gen_degenerate_bandwidth_H(n, d, beta, r, seed, fill=fill)
    assert verify_labelling(H, lab, d, beta).ok
    assert all(col[u] != col[v] for u, v in H.edges())
    assert H.meta["certificate"]["local_ok"]


@given(st.integers(2, 120), st.integers(1, 8), st.integers(0, 10**6))
def test_d1_gives_forest(n, beta, seed):
    H, _, _ = gen_degenerate_bandwidth_H(n, 1, beta, 2, seed)
    root = list(range(n))

    def find(x):
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    for u, v in H.edges():
        a, b = find(u), find(v)
        assert a != b, "cycle through %d-%d" % (u, v)
        root[a] = b


def test_dense_extremes():
    G = gen_dense_rpartite_G([4, 5, 3], 1.0, 0)
    assert G.num_edges() == 4 * 5 + 4 * 3 + 5 * 3
    assert gen_dense_rpartite_G([4, 5, 3], 0.0, 0).num_edges() == 0


def test_dense_density_within_three_sigma():
    p, a, b = 0.3, 30, 40
    N = a * b
    sd = math.sqrt(N * p * (1 - p))
    for seed in range(50):
        G = gen_dense_rpartite_G([a, b], p, seed)
        assert abs(G.num_edges() - p * N) <= 3 * sd


def test_min_degree_generator():
    G = gen_min_degree_G(60, 0.4, 3)
    assert min(G.degree(v) for v in range(60)) >= math.ceil(0.4 * 60)
    with pytest.raises(RetryExhausted):
        gen_min_degree_G(60, 0.95, 3, p=0.5, retries=3)


# ---------------------------------------------------------------- runner

def test_zero_seed_batch(tmp_path):
    reports, summary = run_experiment(preset("relabel", seeds=[0, 0]), out_dir=tmp_path)
    assert reports == []
    assert summary["runs"] == 0 and summary["rate"] is None
    assert json.loads((tmp_path / "summary.json").read_text())["runs"] == 0


@pytest.mark.parametrize("bad", [
    {"schema": 2, "pipeline": "relabel"},
    {"schema": 1, "pipeline": "nope"},
    {"schema": 1, "pipeline": "relabel", "seeds": [0]},
    {"schema": 1, "pipeline": "relabel", "generator": []},
    [],
])
def test_malformed_spec(bad, tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(bad))
    with pytest.raises(SpecError):
        load_spec(path)


def test_invalid_json_spec(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text("{not json")
    with pytest.raises(SpecError):
        load_spec(path)


def test_unknown_preset():
    with pytest.raises(SpecError):
        preset("nonexistent")


def test_report_hash_reproducible():
    spec = preset("bipartite")
    spec["generator"] = {"n": 300, "p": 0.5, "m": 200, "d": 2, "bandwidth": 10}
    spec["params"] = {"d": 2, "beta": 10, "drc": {"s": 1, "lam": 4.0, "beta": 4, "d": 2, "delta": 0.4}}
    a, b = run_one(spec, 7), run_one(spec, 7)
    assert a.success and a.hash == b.hash
    assert a.embedding_hash == b.embedding_hash
    assert run_one(spec, 8).hash != a.hash


def test_parallel_matches_serial():
    spec = preset("relabel", seeds=[0, 4])
    serial, _ = run_experiment(spec)
    par, _ = run_experiment(spec, threads=2)
    assert [r.hash for r in serial] == [r.hash for r in par]


def test_failures_are_recorded_not_raised():
    spec = preset("bipartite")
    spec["generator"] = {"n": 40, "p": 0.05, "m": 30, "d": 2, "bandwidth": 5}
    spec["params"] = {"d": 2, "beta": 5, "drc": {"s": 1, "lam": 4.0, "beta": 4, "d": 2, "delta": 0.4,
                                                 "max_retries": 2}}
    rep = run_one(spec, 0)
    assert not rep.success and rep.cause
    s = summarise([rep, rep])
    assert s["runs"] == 2 and s["successes"] == 0 and sum(s["causes"].values()) == 2


# ---------------------------------------------------------------- command line

def test_cli_exit_codes(tmp_path):
    h, g, empty = tmp_path / "h.json", tmp_path / "g.json", tmp_path / "e.json"
    assert main(["--seed", "3", "gen", "H", "--n", "30", "--d", "2", "--beta", "4", "--out", str(h)]) == 0
    assert main(["check", "labelling", "--h", str(h), "--d", "2", "--beta", "4", "--out", str(tmp_path / "c")]) == 0
    # a 1-local claim on a 4-local instance is refuted
    assert main(["check", "labelling", "--h", str(h), "--d", "2", "--beta", "1", "--out", str(tmp_path / "c")]) == 2
    assert main(["gen", "dense", "--sizes", "40,40", "--p", "0", "--out", str(empty)]) == 0
    assert main(["embed", "bipartite", "--g", str(empty), "--h", str(h), "--out", str(tmp_path / "f")]) == 3
    assert main(["relabel", "--h", str(h), "--d", "1", "--beta", "1", "--out", str(tmp_path / "r")]) == 4
    assert main(["embed", "bipartite", "--g", str(tmp_path / "missing.json"), "--h", str(h)]) == 4
    assert main(["gen", "dense", "--sizes", "60,60", "--p", "0.9", "--out", str(g)]) == 0
    code = main(["embed", "bipartite", "--g", str(g), "--h", str(h), "--out", str(tmp_path / "f.json")])
    assert code == 0
    assert main(["check", "embedding", "--g", str(g), "--h", str(h), "--embedding", str(tmp_path / "f.json"),
                 "--out", str(tmp_path / "v")]) == 0


def test_cli_structures_and_relabel(tmp_path):
    out = tmp_path / "b.json"
    assert main(["structures", "bkr", "--k", "2", "--r", "2", "--out", str(out)]) == 0
    assert len(json.loads(out.read_text())["edges"]) == 4
    h = tmp_path / "h.json"
    main(["gen", "H", "--n", "50", "--d", "1", "--beta", "3", "--priority", "random", "--out", str(h)])
    tr = tmp_path / "trace.json"
    assert main(["relabel", "--h", str(h), "--d", "1", "--beta", "3", "--out", str(tmp_path / "p.json"),
                 "--trace", str(tr)]) == 0
    assert len(json.loads(tr.read_text())["steps"]) == 50


def test_cli_bench_outputs(tmp_path, capsys):
    assert main(["bench", "--preset", "relabel", "--seeds", "0,3", "--out", str(tmp_path)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["runs"] == 3 and summary["rate"] == 1.0
    names = {p.name for p in tmp_path.iterdir()}
    assert {"seed-0.json", "seed-1.json", "seed-2.json", "summary.json", "summary.csv"} <= names
    assert any(n.endswith(".png") for n in names)
    rows = list(csv.DictReader((tmp_path / "summary.csv").open()))
    assert [r["seed"] for r in rows] == ["0", "1", "2"]
    rep = json.loads((tmp_path / "seed-1.json").read_text())
    assert rep["seed"] == 1 and rep["hash"] == run_one(preset("relabel"), 1).hash


def test_cli_budget_flag(tmp_path, monkeypatch):
    monkeypatch.delenv("WEAVE_BUDGET", raising=False)
    g = tmp_path / "g.json"
    main(["gen", "dense", "--sizes", "20,20", "--out", str(g)])
    code = main(["--budget", "10", "check", "potential", "--g", str(g), "--p", "2", "--d", "2",
                 "--beta", "3", "--out", str(tmp_path / "p")])
    assert code == 4
    assert "WEAVE_BUDGET" not in os.environ  # the cap does not outlive the call
