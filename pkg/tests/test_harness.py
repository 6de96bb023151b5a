import json
import pickle
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from asymspec.exceptions import ConfigError, LoadError
from asymspec.graphcore import edge_homophily
from asymspec.harness import cli
from asymspec.harness.checkpoint import load_checkpoint, save_checkpoint
from asymspec.harness.convert import convert
from asymspec.harness.datasets import load_dataset, make_csbm, save_dataset, toy_bundle
from asymspec.harness.experiment import (
    ExperimentConfig,
    delta,
    grid_configs,
    load_config,
    run_experiment,
    run_single,
    search_grid,
)
from asymspec.harness.report import emit_report, results_csv
from asymspec.harness.splits import FractionalPolicy, PerClassPolicy, make_splits
from asymspec.harness.svg import line_chart


def small_cfg(**kw):
    base = dict(K=2, hidden=8, t_max=15, patience=None, seeds=[0, 1], diagnostics_every=0)
    base.update(kw)
    return ExperimentConfig(**base)


def copy_fixture(src: Path, dst: Path) -> Path:
    dst.mkdir()
    for f in src.iterdir():
        (dst / f.name).write_text(f.read_text())
    return dst


class TestDatasets:
    def test_load_toy(self, toy_dir):
        b = load_dataset(toy_dir)
        g = b.graph
        assert (g.n_nodes, g.n_features, g.n_classes, g.n_edges) == (4, 2, 2, 3)
        assert edge_homophily(g) == pytest.approx(2 / 3)
        assert b.provenance == "hand-written fixture"
        ref = toy_bundle().graph
        np.testing.assert_array_equal(g.features, ref.features)

    def test_round_trip(self, tmp_path):
        b = make_csbm(40, 3, 6, seed=2)
        back = load_dataset(save_dataset(b, tmp_path / "c"))
        np.testing.assert_array_equal(back.graph.features, b.graph.features)
        np.testing.assert_array_equal(back.graph.labels, b.graph.labels)
        assert back.graph.n_edges == b.graph.n_edges
        assert back.name == b.name

    def test_bad_edge_reports_row(self, toy_dir, tmp_path):
        d = copy_fixture(toy_dir, tmp_path / "t")
        (d / "edges.csv").write_text("0,1\n1,9\n")
        with pytest.raises(LoadError, match="edge row 2"):
            load_dataset(d)

    def test_malformed_feature_line(self, toy_dir, tmp_path):
        d = copy_fixture(toy_dir, tmp_path / "t")
        (d / "features.csv").write_text("1.0,0.0\n0.8,abc\n0.1,0.9\n0.0,1.0\n")
        with pytest.raises(LoadError, match=r"features\.csv:2"):
            load_dataset(d)

    def test_feature_column_count(self, toy_dir, tmp_path):
        d = copy_fixture(toy_dir, tmp_path / "t")
        (d / "features.csv").write_text("1.0,0.0\n0.8,0.2\n0.1\n0.0,1.0\n")
        with pytest.raises(LoadError, match=r"features\.csv:3"):
            load_dataset(d)

    def test_non_integer_edge(self, toy_dir, tmp_path):
        d = copy_fixture(toy_dir, tmp_path / "t")
        (d / "edges.csv").write_text("0,1\n1,2.5\n")
        with pytest.raises(LoadError, match=r"edges\.csv:2"):
            load_dataset(d)

    def test_label_gap(self, toy_dir, tmp_path):
        d = copy_fixture(toy_dir, tmp_path / "t")
        (d / "labels.csv").write_text("0\n0\n2\n2\n")
        with pytest.raises(LoadError, match="exactly 0..1"):
            load_dataset(d)

    def test_bad_meta(self, toy_dir, tmp_path):
        d = copy_fixture(toy_dir, tmp_path / "t")
        (d / "meta.json").write_text('{"n_nodes": 4,\n "name": ')
        with pytest.raises(LoadError, match=r"meta\.json:2"):
            load_dataset(d)

    def test_missing_dir(self, tmp_path):
        with pytest.raises(LoadError):
            load_dataset(tmp_path / "nope")

    def test_csbm_homophily_tracks_target(self):
        lo = edge_homophily(make_csbm(300, 5, 10, avg_degree=6, homophily=0.1, seed=0).graph)
        hi = edge_homophily(make_csbm(300, 5, 10, avg_degree=6, homophily=0.8, seed=0).graph)
        assert lo < 0.25 and hi > 0.7


class TestSplits:
    def test_texas_sizes(self):
        s = make_splits(183, np.zeros(183, int), FractionalPolicy(), 0)
        assert (len(s.train), len(s.val), len(s.test)) == (5, 5, 173)

    def test_exact_multiple_not_rounded_up(self):
        s = make_splits(200, np.zeros(200, int), FractionalPolicy(), 0)
        assert len(s.train) == 5

    def test_seeded(self):
        a = make_splits(100, np.zeros(100, int), FractionalPolicy(0.1, 0.1), 3)
        b = make_splits(100, np.zeros(100, int), FractionalPolicy(0.1, 0.1), 3)
        assert np.array_equal(a.train, b.train) and np.array_equal(a.test, b.test)

    def test_per_class(self):
        labels = np.repeat(np.arange(3), 50)
        s = make_splits(150, labels, PerClassPolicy(5, 20, 40), 0)
        assert np.array_equal(np.bincount(labels[s.train]), [5, 5, 5])
        assert len(s.val) == 20 and len(s.test) == 40

    def test_per_class_infeasible_names_class(self):
        labels = np.array([0] * 30 + [1] * 3)
        with pytest.raises(ConfigError, match="class 1"):
            make_splits(33, labels, PerClassPolicy(5, 5, 5), 0)

    def test_infeasible_fraction(self):
        with pytest.raises(ConfigError):
            make_splits(10, np.zeros(10, int), FractionalPolicy(0.6, 0.5), 0)

    @settings(max_examples=50, deadline=None)
    @given(n=st.integers(5, 400), pt=st.floats(0.01, 0.4), pv=st.floats(0.0, 0.4), seed=st.integers(0, 10**6))
    def test_partition(self, n, pt, pv, seed):
        try:
            s = make_splits(n, np.zeros(n, int), FractionalPolicy(pt, pv), seed)
        except ConfigError:
            return
        allidx = np.concatenate([s.train, s.val, s.test])
        assert np.array_equal(np.sort(allidx), np.arange(n))


class TestConfig:
    def test_defaults(self):
        c = ExperimentConfig()
        assert (c.K, c.hidden, c.lr_theta, c.lr_w, c.beta_theta, c.beta_w, c.t_max, c.patience) == (
            10, 64, 0.01, 0.01, 0.9, 0.9, 1000, 200
        )
        assert len(c.seeds) == 10

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"modle": "chebyshev"}')
        with pytest.raises(ConfigError, match="modle"):
            load_config(p)

    @pytest.mark.parametrize(
        "kw", [{"model": "gcn"}, {"input_dropout": 1.0}, {"beta_w": 1.5}, {"arms": ["X"]}, {"seeds": []}]
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kw)

    def test_grid_with_jacobi_skips_undefined(self):
        grid = {"jacobi_a": [-2.0, -0.5, 1.0], "jacobi_b": [-1.0, 0.0]}
        cfgs = grid_configs(ExperimentConfig(model="jacobi"), grid)
        assert len(cfgs) == 2
        assert all(c.jacobi_a > -1 and c.jacobi_b > -1 for c in cfgs)

    def test_search_grid_keys(self):
        assert "jacobi_a" in search_grid("jacobi") and "jacobi_a" not in search_grid("chebyshev")


class TestExperiment:
    def test_toy_ten_seeds(self):
        cfg = small_cfg(seeds=list(range(10)))
        reps = run_experiment(cfg, toy_bundle())
        assert set(reps) == {"S", "AS"}
        for rep in reps.values():
            assert len(rep.seeds) == 10 and rep.n_diverged == 0
            assert all(0.0 <= a <= 100.0 for a in rep.accuracies)
        assert np.isfinite(delta(reps))

    def test_arms_paired(self):
        cfg = small_cfg()
        data = make_csbm(60, 3, 8, seed=0)
        s = run_single(cfg, data, 4, "S")
        a = run_single(cfg, data, 4, "AS")
        assert np.array_equal(s.split.train, a.split.train) and np.array_equal(s.split.test, a.split.test)
        # first record is before any update: identical loss and GPNR
        assert s.records[0].train_loss == a.records[0].train_loss
        assert s.records[0].rho_theta == a.records[0].rho_theta

    def test_deterministic(self):
        cfg = small_cfg()
        data = make_csbm(60, 3, 8, seed=0)
        assert results_csv(run_experiment(cfg, data)) == results_csv(run_experiment(cfg, data))

    def test_diagnostics_sampled(self):
        cfg = small_cfg(diagnostics_every=5, arms=["S"], seeds=[0])
        res = run_single(cfg, make_csbm(60, 3, 8, seed=0), 0, "S")
        sampled = [r for r in res.records if r.kappa_block is not None]
        assert [r.iteration for r in sampled] == [0, 5, 10, 15]


class TestReport:
    @pytest.fixture
    def reports(self):
        return run_experiment(small_cfg(diagnostics_every=5), make_csbm(60, 3, 8, seed=0))

    def test_files(self, reports, tmp_path):
        written = emit_report(reports, tmp_path, small_cfg())
        names = {p.name for p in written}
        assert names == {"results.csv", "summary.json", "gpnr_trace.svg", "eigen_ratio_trace.svg"}
        for svg in ("gpnr_trace.svg", "eigen_ratio_trace.svg"):
            ET.fromstring((tmp_path / svg).read_text())
        rows = (tmp_path / "results.csv").read_text().splitlines()
        assert rows[0] == "seed,arm,test_acc,best_val_loss,best_iteration,n_iterations,diverged"
        assert len(rows) == 5

    def test_summary_round_trip(self, reports, tmp_path):
        emit_report(reports, tmp_path)
        s = json.loads((tmp_path / "summary.json").read_text())
        for arm, rep in reports.items():
            assert s["arms"][arm]["mean"] == pytest.approx(rep.mean, abs=1e-12)
            assert s["arms"][arm]["std"] == pytest.approx(rep.std, abs=1e-12)
        assert s["delta"] == pytest.approx(reports["AS"].mean - reports["S"].mean, abs=1e-12)

    def test_no_svg_without_records(self, reports, tmp_path):
        for rep in reports.values():
            for r in rep.seeds:
                r.records = []
        names = {p.name for p in emit_report(reports, tmp_path)}
        assert names == {"results.csv", "summary.json"}

    def test_csv_byte_identical(self, reports, tmp_path):
        emit_report(reports, tmp_path / "a")
        emit_report(reports, tmp_path / "b")
        assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()

    def test_line_chart_log_scale(self):
        doc = ET.fromstring(line_chart({"x": ([0, 1, 2], [1.0, 10.0, 100.0])}, "t", "i", "v", log_y=True))
        assert doc.tag.endswith("svg")


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        cfg = small_cfg(diagnostics_every=5)
        r = run_single(cfg, make_csbm(60, 3, 8, seed=0), 1, "AS")
        ck = load_checkpoint(save_checkpoint(tmp_path / "c.npz", r, cfg, "csbm"))
        assert ck.params.bitwise_equal(r.params)
        assert np.array_equal(ck.split.val, r.split.val)
        assert ck.records == r.records
        assert ck.config == cfg and ck.arm == "AS"

    def test_garbage(self, tmp_path):
        p = tmp_path / "x.npz"
        p.write_bytes(b"nope")
        with pytest.raises(LoadError):
            load_checkpoint(p)


class TestConverters:
    def test_geom_gcn(self, tmp_path):
        (tmp_path / "out1_node_feature_label.txt").write_text(
            "node_id\tfeature\tlabel\n1\t0,1,1\t3\n0\t1,0,0\t0\n2\t1,1,0\t3\n"
        )
        (tmp_path / "out1_graph_edges.txt").write_text("node_id\tnode_id\n0\t1\n1\t2\n")
        b = convert("geom-gcn", tmp_path, "tiny")
        np.testing.assert_array_equal(b.graph.labels, [0, 1, 1])
        np.testing.assert_array_equal(b.graph.features[1], [0, 1, 1])
        assert b.graph.n_edges == 2

    def test_linqs(self, tmp_path):
        (tmp_path / "t.content").write_text("p1 1 0 A\np2 0 1 B\np3 1 1 A\n")
        (tmp_path / "t.cites").write_text("p1 p2\np2 p3\np9 p1\n")
        b = convert("linqs", tmp_path, "t")
        assert b.graph.n_edges == 2 and b.graph.n_classes == 2

    def test_planetoid(self, tmp_path):
        rng = np.random.default_rng(0)
        allx = sp.csr_matrix(rng.random((3, 4)))
        tx = sp.csr_matrix(rng.random((2, 4)))
        ally = np.eye(2)[[0, 1, 0]]
        ty = np.eye(2)[[1, 1]]
        graph = {0: [1], 1: [0, 2], 2: [1, 4], 3: [4], 4: [2, 3]}
        parts = {"x": allx[:2], "y": ally[:2], "allx": allx, "ally": ally, "tx": tx, "ty": ty, "graph": graph}
        for k, v in parts.items():
            with open(tmp_path / f"ind.toy.{k}", "wb") as fh:
                pickle.dump(v, fh)
        (tmp_path / "ind.toy.test.index").write_text("4\n3\n")
        b = convert("planetoid", tmp_path, "toy")
        # test rows are reordered to their indices
        np.testing.assert_allclose(b.graph.features[4], tx.toarray()[0])
        assert b.graph.n_nodes == 5 and b.graph.n_classes == 2

    def test_unknown_format(self, tmp_path):
        with pytest.raises(LoadError):
            convert("ogb", tmp_path, "x")


class TestCli:
    def test_run_ok(self, toy_dir, tmp_path, capsys):
        code = cli.main(["run", "--dataset", str(toy_dir), "--model", "chebyshev", "--seeds", "2",
                         "--t-max", "5", "--diagnostics-every", "0", "--out", str(tmp_path), "--save-checkpoints"])
        assert code == 0
        assert "delta" in capsys.readouterr().out
        assert (tmp_path / "results.csv").exists()
        assert len(list((tmp_path / "checkpoints").glob("*.npz"))) == 4

    def test_config_error_exit_1(self, toy_dir, tmp_path):
        assert cli.main(["run", "--dataset", str(toy_dir), "--model", "gcn", "--out", str(tmp_path)]) == 1

    def test_missing_dataset_exit_1(self, tmp_path):
        assert cli.main(["run", "--dataset", str(tmp_path / "none"), "--out", str(tmp_path)]) == 1

    def test_all_diverged_exit_2(self, tmp_path, capsys):
        d = save_dataset(make_csbm(40, 2, 4, seed=0), tmp_path / "d")
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"optimizer": "gd", "lr_theta": 1e200, "lr_w": 1e200, "K": 2, "hidden": 4,
                                   "t_max": 5, "seeds": [0], "diagnostics_every": 0, "arms": ["S"]}))
        assert cli.main(["run", "--dataset", str(d), "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_inspect(self, toy_dir, capsys):
        assert cli.main(["inspect", "--dataset", str(toy_dir)]) == 0
        out = capsys.readouterr().out
        assert "nodes=4" in out and "H_edge=0.6667" in out

    def test_quadbench(self, tmp_path):
        assert cli.main(["quadbench", "--trials", "50", "--out", str(tmp_path)]) == 0
        s = json.loads((tmp_path / "quadbench.json").read_text())
        assert s["hypotheses_met"] == s["theorem_holds_when_met"]

    def test_audit(self, tmp_path):
        d = save_dataset(make_csbm(50, 3, 6, seed=1), tmp_path / "d")
        out = tmp_path / "o"
        assert cli.main(["run", "--dataset", str(d), "--seeds", "1", "--asym", "off", "--t-max", "10",
                         "--diagnostics-every", "5", "--out", str(out), "--save-checkpoints"]) == 0
        ck = out / "checkpoints" / "seed0_S.npz"
        assert cli.main(["audit", "--checkpoint", str(ck), "--dataset", str(d), "--out", str(tmp_path / "a.json")]) == 0
        rep = json.loads((tmp_path / "a.json").read_text())
        assert {"points", "ordering", "violations", "mild_scaling"} <= set(rep)

    def test_convert(self, tmp_path):
        src = tmp_path / "src"
        src.mkdir()
        (src / "t.content").write_text("a 1 0 X\nb 0 1 Y\n")
        (src / "t.cites").write_text("a b\n")
        assert cli.main(["convert", "--format", "linqs", "--src", str(src), "--name", "t", "--out", str(tmp_path / "b")]) == 0
        assert load_dataset(tmp_path / "b").graph.n_nodes == 2
