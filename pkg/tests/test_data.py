"""Data ingestion tests: canonical document round-trips, the upstream
converter against an authored pickle fixture, TU flat-file parsing, the
closed-neighborhood construction, folds and splits."""

import json
import pickle

import numpy as np
import pytest

from heraldnet import (DataValidationError, Hypergraph, NodeDataset,
                       graph_to_hypergraph, load_node_dataset, make_folds,
                       save_node_dataset, semi_supervised_split,
                       synthetic_graph_dataset, synthetic_node_dataset,
                       tu_graph_dataset)
from heraldnet.data import PlainGraph, convert_hypergcn_release, load_tu_dataset


def _tiny_dataset(seed=3):
    rng = np.random.default_rng(seed)
    hg = Hypergraph(4, [(0, 1), (1, 2, 3)])
    features = rng.normal(size=(4, 3))
    labels = np.array([0, 1, 0, 1])
    masks = {"train": np.array([True, True, False, False]),
             "val": np.array([False, False, True, False]),
             "test": np.array([False, False, False, True])}
    return NodeDataset("tiny", hg, features, labels, masks)


class TestCanonicalFormat:
    def test_round_trip_identical(self, tmp_path):
        ds = _tiny_dataset()
        path = tmp_path / "tiny.json"
        save_node_dataset(ds, path)
        back = load_node_dataset(path)
        assert back.name == ds.name
        assert back.hypergraph.num_nodes == ds.hypergraph.num_nodes
        assert back.hypergraph.hyperedges == ds.hypergraph.hyperedges
        np.testing.assert_array_equal(back.hypergraph.edge_weights,
                                      ds.hypergraph.edge_weights)
        np.testing.assert_array_equal(back.features, ds.features)
        np.testing.assert_array_equal(back.labels, ds.labels)
        assert set(back.masks) == set(ds.masks)
        for name in ds.masks:
            np.testing.assert_array_equal(back.masks[name], ds.masks[name])

    def test_hand_written_fixture(self, tmp_path):
        doc = {
            "format": "hypergraph-node-dataset", "version": 1,
            "name": "fixture", "num_nodes": 4,
            "hyperedges": [[0, 1], [1, 2], [2, 3]],
            "edge_weights": [1.0, 2.0, 1.0],
            "features": [[1, 0], [0, 1], [1, 1], [0, 0]],
            "labels": [0, 0, 1, 1],
            "masks": {"train": [0, 2], "val": [1], "test": [3]},
        }
        path = tmp_path / "fixture.json"
        path.write_text(json.dumps(doc))
        ds = load_node_dataset(path)
        assert ds.hypergraph.hyperedges == ((0, 1), (1, 2), (2, 3))
        np.testing.assert_array_equal(ds.hypergraph.edge_weights, [1, 2, 1])
        np.testing.assert_array_equal(ds.masks["train"],
                                      [True, False, True, False])
        assert ds.num_classes == 2

    def test_malformed_json_reports_path(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(DataValidationError, match="broken.json"):
            load_node_dataset(path)

    def test_wrong_format_marker(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text(json.dumps({"format": "something-else", "version": 1}))
        with pytest.raises(DataValidationError, match="format"):
            load_node_dataset(path)

    def test_label_out_of_declared_range(self, tmp_path):
        doc = {
            "format": "hypergraph-node-dataset", "version": 1,
            "num_nodes": 2, "hyperedges": [[0, 1]], "edge_weights": [1.0],
            "features": [[1.0], [2.0]], "labels": [0, 5], "num_classes": 2,
            "masks": {},
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(DataValidationError, match="label"):
            load_node_dataset(path)

    def test_isolated_nodes_patched_on_load(self, tmp_path):
        doc = {
            "format": "hypergraph-node-dataset", "version": 1,
            "num_nodes": 3, "hyperedges": [[0, 1]], "edge_weights": [1.0],
            "features": [[1.0], [2.0], [3.0]], "labels": [0, 1, 0],
            "masks": {},
        }
        path = tmp_path / "isolated.json"
        path.write_text(json.dumps(doc))
        ds = load_node_dataset(path)
        assert (2,) in ds.hypergraph.hyperedges

    def test_overlapping_masks_rejected(self):
        with pytest.raises(DataValidationError, match="overlap"):
            NodeDataset("x", Hypergraph(2, [(0, 1)]), np.zeros((2, 1)),
                        np.array([0, 1]),
                        {"train": np.array([True, False]),
                         "val": np.array([True, False])})


class TestUpstreamConverter:
    def test_converts_authored_release(self, tmp_path):
        # shape of the upstream co-citation releases: pickled dict of
        # hyperedge -> member list, sparse features, label list
        import scipy.sparse as sp
        release = tmp_path / "release"
        release.mkdir()
        edges = {"e0": [0, 1, 2], "e1": [2, 3], "e2": []}
        features = sp.csr_matrix(np.arange(8.0).reshape(4, 2))
        labels = [0, 1, 1, 0]
        for name, obj in [("hypergraph", edges), ("features", features),
                          ("labels", labels)]:
            with (release / f"{name}.pickle").open("wb") as fh:
                pickle.dump(obj, fh)
        ds = convert_hypergcn_release(release, name="converted")
        assert ds.name == "converted"
        assert ds.hypergraph.num_nodes == 4
        assert (0, 1, 2) in ds.hypergraph.hyperedges  # empty edge dropped
        np.testing.assert_array_equal(ds.features,
                                      np.arange(8.0).reshape(4, 2))

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(DataValidationError, match="missing"):
            convert_hypergcn_release(tmp_path)


def _write_tu_fixture(root, name="TOY"):
    """Two graphs: a triangle (label 1) and a 2-path (label -1)."""
    d = root / name
    d.mkdir()
    (d / f"{name}_A.txt").write_text(
        "1, 2\n2, 1\n1, 3\n3, 1\n2, 3\n3, 2\n4, 5\n5, 4\n5, 6\n6, 5\n")
    (d / f"{name}_graph_indicator.txt").write_text("1\n1\n1\n2\n2\n2\n")
    (d / f"{name}_graph_labels.txt").write_text("1\n-1\n")
    (d / f"{name}_node_labels.txt").write_text("0\n0\n1\n1\n0\n1\n")
    return d


class TestTUParsing:
    def test_toy_fixture_exact_parse(self, tmp_path):
        d = _write_tu_fixture(tmp_path)
        graphs = load_tu_dataset(d)
        assert len(graphs) == 2
        triangle, path = graphs
        assert triangle.num_nodes == 3
        assert triangle.edges == ((0, 1), (0, 2), (1, 2))
        assert path.edges == ((0, 1), (1, 2))
        # labels remapped deterministically: sorted(-1, 1) -> {-1: 0, 1: 1}
        assert (triangle.label, path.label) == (1, 0)
        assert triangle.node_labels == (0, 0, 1)

    def test_empty_graph_record_rejected(self, tmp_path):
        d = tmp_path / "EMPTY"
        d.mkdir()
        (d / "EMPTY_A.txt").write_text("1, 2\n")
        (d / "EMPTY_graph_indicator.txt").write_text("1\n1\n")
        (d / "EMPTY_graph_labels.txt").write_text("1\n-1\n")  # graph 2 empty
        with pytest.raises(DataValidationError, match="no nodes"):
            load_tu_dataset(d)

    def test_cross_graph_edge_rejected(self, tmp_path):
        d = tmp_path / "XG"
        d.mkdir()
        (d / "XG_A.txt").write_text("1, 3\n")
        (d / "XG_graph_indicator.txt").write_text("1\n1\n2\n")
        (d / "XG_graph_labels.txt").write_text("1\n2\n")
        with pytest.raises(DataValidationError, match="crosses"):
            load_tu_dataset(d)

    def test_features_one_hot_node_labels(self, tmp_path):
        d = _write_tu_fixture(tmp_path)
        ds = tu_graph_dataset(d)
        assert ds.num_features == 2  # node label values {0, 1}
        np.testing.assert_array_equal(ds.samples[0].features,
                                      [[1, 0], [1, 0], [0, 1]])

    def test_degree_features_when_labels_absent(self, tmp_path):
        d = _write_tu_fixture(tmp_path, name="NOLAB")
        (d / "NOLAB_node_labels.txt").unlink()
        ds = tu_graph_dataset(d, degree_cap=3)
        assert ds.num_features == 4
        # triangle: every node has degree 2
        np.testing.assert_array_equal(ds.samples[0].features[:, 2], 1.0)


class TestClosedNeighborhood:
    def test_triangle_gives_three_full_edges(self):
        g = PlainGraph(3, ((0, 1), (0, 2), (1, 2)), None, 0)
        hg = graph_to_hypergraph(g)
        assert hg.hyperedges == ((0, 1, 2), (0, 1, 2), (0, 1, 2))

    def test_path_rule_by_hand(self):
        g = PlainGraph(3, ((0, 1), (1, 2)), None, 0)
        hg = graph_to_hypergraph(g)
        assert hg.hyperedges == ((0, 1), (0, 1, 2), (1, 2))

    def test_isolated_node_becomes_singleton(self):
        g = PlainGraph(2, (), None, 0)
        hg = graph_to_hypergraph(g)
        assert hg.hyperedges == ((0,), (1,))

    @pytest.mark.parametrize("seed", range(5))
    def test_edge_count_equals_node_count(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 12))
        edges = tuple((u, v) for u in range(n) for v in range(u + 1, n)
                      if rng.random() < 0.4)
        hg = graph_to_hypergraph(PlainGraph(n, edges, None, 0))
        assert hg.num_edges == hg.num_nodes == n


class TestFolds:
    def test_balanced_exact_division(self):
        labels = np.array([0] * 50 + [1] * 50)
        assignment = make_folds(labels, k=10, seed=0)
        for fold in range(10):
            members = labels[assignment == fold]
            assert members.size == 10
            assert (members == 0).sum() == 5

    def test_deterministic_for_seed(self):
        labels = np.random.default_rng(0).integers(0, 3, size=83)
        a = make_folds(labels, k=10, seed=5)
        b = make_folds(labels, k=10, seed=5)
        np.testing.assert_array_equal(a, b)
        c = make_folds(labels, k=10, seed=6)
        assert not np.array_equal(a, c)

    @pytest.mark.parametrize("seed", range(10))
    def test_partition_property(self, seed):
        rng = np.random.default_rng(seed)
        labels = rng.integers(0, 4, size=int(rng.integers(20, 120)))
        k = int(rng.integers(2, 10))
        assignment = make_folds(labels, k=k, seed=seed)
        assert assignment.shape == labels.shape
        assert set(np.unique(assignment)) <= set(range(k))
        sizes = np.bincount(assignment, minlength=k)
        assert sizes.max() - sizes.min() <= 4  # near-equal

    def test_small_class_falls_back_unstratified(self, caplog):
        labels = np.array([0] * 30 + [1] * 3)
        with caplog.at_level("WARNING"):
            assignment = make_folds(labels, k=10, seed=0)
        assert "unstratified" in caplog.text
        assert np.bincount(assignment, minlength=10).min() >= 3

    def test_rejects_k_larger_than_dataset(self):
        with pytest.raises(DataValidationError):
            make_folds(np.array([0, 1]), k=10, seed=0)


class TestSplit:
    def test_counts_and_disjointness(self):
        labels = np.random.default_rng(0).integers(0, 7, size=2000)
        masks = semi_supervised_split(labels, seed=0, train_per_class=20,
                                      num_val=300, num_test=500)
        assert masks["train"].sum() == 140
        assert masks["val"].sum() == 300
        assert masks["test"].sum() == 500
        assert not (masks["train"] & masks["val"]).any()
        assert not (masks["train"] & masks["test"]).any()
        assert not (masks["val"] & masks["test"]).any()
        for c in range(7):
            assert (labels[masks["train"]] == c).sum() == 20

    def test_deterministic(self):
        labels = np.random.default_rng(1).integers(0, 3, size=300)
        a = semi_supervised_split(labels, seed=4, num_val=50, num_test=50)
        b = semi_supervised_split(labels, seed=4, num_val=50, num_test=50)
        for name in a:
            np.testing.assert_array_equal(a[name], b[name])


class TestSynthetic:
    def test_node_dataset_is_valid_and_deterministic(self):
        a = synthetic_node_dataset(seed=1)
        b = synthetic_node_dataset(seed=1)
        np.testing.assert_array_equal(a.features, b.features)
        assert a.hypergraph.hyperedges == b.hypergraph.hyperedges
        assert a.masks["train"].sum() > 0
        assert a.num_classes == 3

    def test_graph_dataset_layout(self):
        ds = synthetic_graph_dataset(seed=0, num_graphs=10)
        assert len(ds) == 10
        assert ds.num_classes == 2
        for sample in ds.samples:
            assert sample.hypergraph.num_edges == sample.hypergraph.num_nodes
