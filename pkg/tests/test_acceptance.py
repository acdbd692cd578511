"""Exit criteria for the package.

Each test carries a ``criterion`` marker; ``conftest.py`` prints one
PASS/FAIL/SKIP line per criterion at the end of the run.

The ca-GrQc spot check needs the SNAP edge list, which is not bundled: set
``RWHDP_GRQC`` to the path of ``CA-GrQc.txt`` (gzip or plain) to run it.
"""
import gzip
import io
import os
import statistics
import time

import numpy as np
import pytest

import oracles
from rwhdp import cli
from rwhdp.community import (assign, conductance, cut_ratio, internal_density, modularity,
                             node_posteriors)
from rwhdp.corpus import generate_corpus
from rwhdp.graph import load_edge_list, planted_partition, write_edge_list
from rwhdp.hdp import GlobalState, HdpConfig, fit, local_step, perplexity
from test_community import metric_mismatches, random_cases


def detect(g, seed, config=None, walks_per_node=5, length=100):
    corpus = generate_corpus(g, walks_per_node * g.num_nodes, length, seed)
    state = fit(corpus, config or HdpConfig(), seed)
    return assign(node_posteriors(state))


@pytest.mark.criterion(1, "metric oracle suite, 100 random graphs, tol 1e-12, < 10 s")
def test_metric_oracle_suite():
    start = time.perf_counter()
    cases = random_cases(100, seed=7)
    bad = metric_mismatches(cases, tol=1e-12)
    elapsed = time.perf_counter() - start
    print(f"criterion 1: {len(cases)} graphs, {len(bad)} mismatches, {elapsed:.2f}s")
    assert bad == []
    assert elapsed < 10


@pytest.mark.criterion(2, "barbell exact values and single-community modularity")
def test_barbell_exactness(barbell):
    left = [0, 1, 2]
    q = modularity(barbell, [0, 0, 0, 1, 1, 1])
    print(f"criterion 2: Q={q!r} conductance={conductance(barbell, left)!r} "
          f"cut_ratio={cut_ratio(barbell, left)!r} density={internal_density(barbell, left)!r}")
    assert abs(q - 5 / 14) <= 1e-15
    assert conductance(barbell, left) == 1 / 7
    assert conductance(barbell, [3, 4, 5]) == 1 / 7
    assert cut_ratio(barbell, left) == 1 / 9
    assert internal_density(barbell, left) == 1.0
    assert internal_density(barbell, [3, 4, 5]) == 1.0
    assert modularity(barbell, [0] * 6) == 0.0


@pytest.mark.criterion(3, "planted partition (4, 32, 0.3, 0.01): 4 communities, Q >= 0.95 Q_truth")
def test_planted_partition_recovery():
    counts, ratios = [], []
    for seed in range(5):
        start = time.perf_counter()
        g, truth = planted_partition(4, 32, 0.3, 0.01, seed)
        part = detect(g, seed)
        elapsed = time.perf_counter() - start
        q, q_truth = modularity(g, part), modularity(g, truth)
        counts.append(part.num_communities)
        ratios.append(q / q_truth)
        print(f"criterion 3: seed {seed} communities={part.num_communities} Q={q:.4f} "
              f"Q_truth={q_truth:.4f} ratio={q / q_truth:.4f} time={elapsed:.1f}s")
        assert elapsed < 120
    assert statistics.median(counts) == 4
    assert statistics.median(ratios) >= 0.95


@pytest.mark.criterion(4, "two disjoint triangles give their two components, every seed, < 5 s")
def test_disconnected_components():
    g, truth = planted_partition(2, 3, 1.0, 0.0, seed=0)
    start = time.perf_counter()
    for seed in range(5):
        part = detect(g, seed)
        print(f"criterion 4: seed {seed} labels={part.labels.tolist()}")
        assert part.labels.tolist() == truth.tolist()
    elapsed = time.perf_counter() - start
    print(f"criterion 4: {elapsed:.2f}s for 5 seeds")
    assert elapsed < 5


def _read_grqc(path):
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as fh:
        return load_edge_list(fh)


@pytest.mark.criterion(5, "ca-GrQc best-of-3 modularity >= 0.70 (needs RWHDP_GRQC)")
@pytest.mark.skipif(not os.environ.get("RWHDP_GRQC"), reason="RWHDP_GRQC not set")
def test_grqc_spot_check():
    g = _read_grqc(os.environ["RWHDP_GRQC"])
    print(f"criterion 5: ca-GrQc V={g.num_nodes} E={g.num_edges}")
    best = -1.0
    for seed in range(3):
        start = time.perf_counter()
        q = modularity(g, detect(g, seed))
        elapsed = time.perf_counter() - start
        print(f"criterion 5: seed {seed} Q={q:.4f} time={elapsed:.0f}s")
        assert elapsed < 30 * 60
        best = max(best, q)
    assert best >= 0.70


@pytest.mark.criterion(6, "held-out perplexity after epoch 3 < after epoch 1 (median of 3 seeds)")
def test_perplexity_improves():
    improvements = []
    for seed in range(3):
        g, _ = planted_partition(4, 32, 0.3, 0.01, seed)
        corpus = generate_corpus(g, 5 * g.num_nodes, 100, seed)
        train, test = corpus.split_holdout(0.1)
        config = HdpConfig()
        by_epoch = {}
        fit(train, config, seed,
            callback=lambda epoch, state: by_epoch.__setitem__(epoch, perplexity(test, state, config)))
        print(f"criterion 6: seed {seed} perplexity by epoch "
              + " ".join(f"{e}:{p:.4f}" for e, p in sorted(by_epoch.items())))
        improvements.append(by_epoch[1] - by_epoch[3])
    assert statistics.median(improvements) > 0


@pytest.mark.criterion(7, "local step equals dense full-batch coordinate ascent to 1e-6")
def test_inference_oracle():
    rng = np.random.default_rng(77)
    worst = 0.0
    fixtures = 0
    for K in (1, 2, 3):
        for T in range(1, min(K, 2) + 1):
            for V in (1, 3, 6):
                for _ in range(3):
                    docs = [rng.integers(0, V, int(rng.integers(1, 11))).tolist()
                            for _ in range(int(rng.integers(1, 6)))]
                    state = GlobalState(rng.uniform(0.1, 4.0, (K, V)), rng.uniform(0.3, 3.0, K),
                                        rng.uniform(0.3, 3.0, K))
                    config = HdpConfig(K=K, T=T, alpha=float(rng.uniform(0.3, 2.0)),
                                       local_tol=1e-14, max_local_iters=5000)
                    expected = oracles.full_batch_local(docs, state.lam.tolist(), state.a.tolist(),
                                                        state.b.tolist(), T, config.alpha)
                    for doc, (zeta, phi) in zip(docs, expected):
                        local, _ = local_step(doc, state, config)
                        worst = max(worst, np.abs(local.zeta - zeta).max(),
                                    np.abs(local.phi - phi).max())
                    fixtures += 1
    print(f"criterion 7: {fixtures} fixtures, worst deviation {worst:.2e}")
    assert worst < 1e-6


@pytest.mark.criterion(8, "byte-identical corpus, checkpoint, labels, report at 1 and 8 workers")
def test_pipeline_determinism(tmp_path):
    g, _ = planted_partition(3, 10, 0.5, 0.02, seed=8)
    graph_path = tmp_path / "graph.txt"
    with open(graph_path, "w") as fh:
        write_edge_list(g, fh)
    runs = {}
    for name, workers in (("w1a", 1), ("w1b", 1), ("w8", 8)):
        out = tmp_path / name
        assert cli.main(["pipeline", "--graph", str(graph_path), "--out-dir", str(out),
                         "--seed", "11", "--workers", str(workers)]) == 0
        runs[name] = {f: (out / f).read_bytes()
                      for f in ("corpus.txt", "model.ckpt", "labels.txt", "report.txt")}
    for f in runs["w1a"]:
        same = runs["w1a"][f] == runs["w1b"][f] == runs["w8"][f]
        print(f"criterion 8: {f} identical={same}")
        assert same
    report = io.StringIO(runs["w8"]["report.txt"].decode())
    assert report.readline().startswith("nodes 30")
