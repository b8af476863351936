import csv
import json
import networkx as nx
import numpy as np
import pytest
from scipy import stats

import threatnet as tn


def dense_stationary(n, edges, damping):
    p = np.zeros((n, n))
    out = np.zeros(n)
    for a, b, w in edges:
        if a != b:
            p[a, b] += w
            out[a] += w
    for i in range(n):
        if out[i] > 0:
            p[i] = damping * p[i] / out[i] + (1 - damping) / n
        else:
            p[i] = 1.0 / n
    a = np.vstack([p.T - np.eye(n), np.ones(n)])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    return np.linalg.lstsq(a, rhs, rcond=None)[0]


def test_extract_cves():
    assert tn.extract_cves("see CVE-2017-0144 and cve-2017-0144, then CVE-2019-10149") == [
        "CVE-2017-0144",
        "CVE-2019-10149",
    ]
    assert tn.is_cve_id("CVE-2017-0144")
    assert not tn.is_cve_id("CVE-17-1")


def test_graph_kernels_against_numpy_and_networkx():
    rng = np.random.default_rng(4)
    for _ in range(10):
        n = int(rng.integers(2, 9))
        edges = [(int(a), int(b), 1.0) for a, b in rng.integers(0, n, size=(3 * n, 2)) if a != b]
        pi = tn.stationary_distribution(n, edges, damping=0.85)
        assert np.allclose(pi, dense_stationary(n, edges, 0.85), atol=1e-8)
        assert np.allclose(tn.pagerank(n, edges), pi, atol=1e-12)

        g = nx.DiGraph()
        g.add_nodes_from(range(n))
        g.add_edges_from((a, b) for a, b, _ in edges)
        ref = nx.betweenness_centrality(g, normalized=False)
        assert np.allclose(tn.betweenness(n, edges), [ref[v] for v in range(n)], atol=1e-12)

        sp = dict(nx.all_pairs_shortest_path_length(g))
        got = tn.min_distances(n, edges, [0], [n - 1])
        if n - 1 in sp[0]:
            assert got == {0: sp[0][n - 1]}
        else:
            assert got == {}


def test_conductance_and_communities():
    assert tn.conductance(2, [(0, 1, 1.0), (1, 0, 1.0)], [0], damping=1.0) == pytest.approx(1.0)
    pair = [(a, b, 1.0) for a in range(4) for b in range(4) if a != b]
    pair += [(a + 4, b + 4, 1.0) for a, b, _ in pair] + [(0, 4, 1.0)]
    assert tn.communities(8, pair) == [0, 0, 0, 0, 1, 1, 1, 1]
    with pytest.raises(tn.ThreatnetError):
        tn.betweenness(2, [(0, 5, 1.0)])


def test_welch():
    a = [19.8, 20.4, 19.6, 17.8, 18.5, 18.9, 18.3, 18.9, 19.5, 22.0]
    b = [28.2, 26.6, 20.1, 23.3, 25.2, 22.1, 17.7, 27.6, 20.6, 13.7, 23.2, 17.5, 20.6, 18.0, 23.9, 21.6, 24.3, 20.4, 24.0, 13.2]
    r = tn.welch_ttest(a, b)
    ref = stats.ttest_ind(a, b, equal_var=False, alternative="greater")
    assert r["t_stat"] == pytest.approx(ref.statistic, abs=1e-10)
    assert r["p_value"] == pytest.approx(ref.pvalue, abs=1e-10)
    assert r["p_value"] + tn.welch_ttest(b, a)["p_value"] == pytest.approx(1.0, abs=1e-12)


def test_config_and_cli_subcommands():
    cfg = tn.default_config({"delta": 3, "dump_edges": False})
    assert cfg["delta"] == 3 and cfg["eta"] == 8 and cfg["dump_edges"] is False
    assert "all" in tn.subcommands()
    with pytest.raises(tn.ThreatnetError, match="config"):
        tn.default_config({"no_such_key": 1})


def test_pipeline_end_to_end(tmp_path):
    files = tn.synth(tmp_path / "corpus", n_forums=2, users_per_forum=40, days=200, seed=3)
    out = tmp_path / "out"
    written, log = tn.run(
        "all",
        {
            "posts": str(files["posts"]),
            "incidents": str(files["incidents"]),
            "cpe_map": str(files["cpe_map"]),
            "output_dir": str(out),
            "forum_min_posts": 100,
            "features": "conductance",
            "model": "ridge",
            "delta": 2,
            "eta": 1,
            "baseline_trials": 500,
            "dump_edges": False,
        },
    )
    assert (out / "metrics.csv").exists()
    assert written and log
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert manifest["inputs"]["posts"]["sha256"] == tn.sha256_file(files["posts"])
    with open(out / "metrics.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and all(0.0 <= float(r["f1"]) <= 1.0 for r in rows)

    with pytest.raises(tn.ThreatnetError):
        tn.run("train", {"output_dir": str(tmp_path / "bad"), "incidents": str(tmp_path / "missing.csv")})
