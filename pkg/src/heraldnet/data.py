"""Dataset ingestion and preparation.

Two corpora families are supported:

* node classification over a single hypergraph, stored in a canonical
  self-describing JSON document (hyperedge member lists, dense feature
  rows, labels, named masks). A converter ingests the upstream
  co-citation/co-authorship releases (pickled incidence dict + sparse
  features + labels) into this format, isolating the package from upstream
  layout churn.
* graph classification over TU-style flat files (DS_A.txt,
  DS_graph_indicator.txt, DS_graph_labels.txt, optional DS_node_labels.txt),
  turned into hypergraphs by the closed-neighborhood construction: one
  hyperedge per node, containing the node and its neighbors.

Loaders are pure and datasets immutable after load. Isolated nodes are
patched with singleton self-hyperedges at load time (logged).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataValidationError
from .hypergraph import Hypergraph, patch_isolated_nodes

logger = logging.getLogger(__name__)

NODE_DATASET_FORMAT = "hypergraph-node-dataset"
NODE_DATASET_VERSION = 1


@dataclass(frozen=True, eq=False)
class NodeDataset:
    """A hypergraph with per-node features, labels and split masks."""

    name: str
    hypergraph: Hypergraph
    features: np.ndarray          # |V| x d
    labels: np.ndarray            # |V| int class ids
    masks: dict[str, np.ndarray]  # name -> |V| bool

    def __post_init__(self):
        n = self.hypergraph.num_nodes
        if self.features.shape[0] != n:
            raise DataValidationError(
                f"features rows {self.features.shape[0]} != |V| {n}")
        if self.labels.shape != (n,):
            raise DataValidationError(f"labels shape {self.labels.shape} != ({n},)")
        if self.labels.min() < 0:
            raise DataValidationError("labels must be non-negative class ids")
        covered = np.zeros(n, dtype=bool)
        for mask_name, mask in self.masks.items():
            if mask.shape != (n,) or mask.dtype != np.bool_:
                raise DataValidationError(
                    f"mask {mask_name!r} must be a |V| boolean array")
            if (covered & mask).any():
                raise DataValidationError(
                    f"mask {mask_name!r} overlaps another split mask")
            covered |= mask

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])


@dataclass(frozen=True)
class GraphSample:
    hypergraph: Hypergraph
    features: np.ndarray
    label: int


@dataclass(frozen=True, eq=False)
class GraphDataset:
    """A collection of small hypergraphs with one label each."""

    name: str
    samples: tuple[GraphSample, ...]
    num_classes: int
    num_features: int

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.samples)


# ---------------------------------------------------------------------------
# canonical node-dataset document
# ---------------------------------------------------------------------------

def save_node_dataset(dataset: NodeDataset, path) -> None:
    doc = {
        "format": NODE_DATASET_FORMAT,
        "version": NODE_DATASET_VERSION,
        "name": dataset.name,
        "num_nodes": dataset.hypergraph.num_nodes,
        "hyperedges": [list(e) for e in dataset.hypergraph.hyperedges],
        "edge_weights": dataset.hypergraph.edge_weights.tolist(),
        "features": dataset.features.tolist(),
        "labels": dataset.labels.tolist(),
        "num_classes": dataset.num_classes,
        "masks": {name: np.flatnonzero(mask).tolist()
                  for name, mask in dataset.masks.items()},
    }
    Path(path).write_text(json.dumps(doc))


def load_node_dataset(path) -> NodeDataset:
    """Parse a canonical node-dataset document, patching isolated nodes."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataValidationError(f"cannot parse {path}: {exc}") from exc
    if doc.get("format") != NODE_DATASET_FORMAT:
        raise DataValidationError(
            f"{path}: expected format {NODE_DATASET_FORMAT!r}, "
            f"got {doc.get('format')!r}")
    if doc.get("version") != NODE_DATASET_VERSION:
        raise DataValidationError(
            f"{path}: unsupported version {doc.get('version')!r}")
    for key in ("num_nodes", "hyperedges", "features", "labels", "masks"):
        if key not in doc:
            raise DataValidationError(f"{path}: missing field {key!r}")
    n = int(doc["num_nodes"])
    hg = Hypergraph(n, tuple(tuple(e) for e in doc["hyperedges"]),
                    np.asarray(doc["edge_weights"], dtype=np.float64)
                    if doc.get("edge_weights") is not None else None)
    hg, patched = patch_isolated_nodes(hg)
    if patched:
        logger.info("%s: %d isolated node(s) patched", path.name, len(patched))
    features = np.asarray(doc["features"], dtype=np.float64)
    labels = np.asarray(doc["labels"], dtype=np.int64)
    if "num_classes" in doc and labels.size \
            and labels.max() >= int(doc["num_classes"]):
        raise DataValidationError(
            f"{path}: label {int(labels.max())} outside declared "
            f"{doc['num_classes']} classes")
    masks = {}
    for mask_name, indices in doc["masks"].items():
        mask = np.zeros(n, dtype=bool)
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise DataValidationError(
                f"{path}: mask {mask_name!r} index outside [0, {n})")
        mask[idx] = True
        masks[mask_name] = mask
    name = doc.get("name", path.stem)
    return NodeDataset(name, hg, features, labels, masks)


def convert_hypergcn_release(directory, name: str | None = None) -> NodeDataset:
    """Ingest an upstream co-citation/co-authorship release directory:
    ``hypergraph.pickle`` (dict hyperedge-name -> node list),
    ``features.pickle`` (scipy sparse or dense array) and
    ``labels.pickle`` (list of class ids). Produces an unmasked dataset;
    add a split with :func:`semi_supervised_split`."""
    import pickle

    directory = Path(directory)
    paths = {key: directory / f"{key}.pickle"
             for key in ("hypergraph", "features", "labels")}
    for key, p in paths.items():
        if not p.exists():
            raise DataValidationError(f"missing upstream file {p}")
    with paths["hypergraph"].open("rb") as fh:
        edges_dict = pickle.load(fh)
    with paths["features"].open("rb") as fh:
        features = pickle.load(fh)
    with paths["labels"].open("rb") as fh:
        labels = pickle.load(fh)
    if hasattr(features, "toarray"):  # scipy sparse
        features = features.toarray()
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = features.shape[0]
    hyperedges = tuple(tuple(int(v) for v in members)
                       for members in edges_dict.values() if len(members))
    hg, patched = patch_isolated_nodes(Hypergraph(n, hyperedges))
    if patched:
        logger.info("upstream release: patched %d isolated node(s)", len(patched))
    dataset_name = name or directory.name
    return NodeDataset(dataset_name, hg, features, labels, masks={})


# ---------------------------------------------------------------------------
# splits and folds
# ---------------------------------------------------------------------------

def semi_supervised_split(labels: np.ndarray, seed: int,
                          train_per_class: int = 20, num_val: int = 500,
                          num_test: int = 1000) -> dict[str, np.ndarray]:
    """The planted split convention: ``train_per_class`` labeled nodes per
    class, then ``num_val`` and ``num_test`` nodes drawn from the rest."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    rng = np.random.default_rng(seed)
    train = np.zeros(n, dtype=bool)
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if members.size < train_per_class:
            raise DataValidationError(
                f"class {c} has only {members.size} members, "
                f"need {train_per_class} for the train split")
        train[rng.permutation(members)[:train_per_class]] = True
    rest = rng.permutation(np.flatnonzero(~train))
    if rest.size < num_val + num_test:
        raise DataValidationError(
            f"{rest.size} unlabeled nodes cannot provide "
            f"{num_val} validation + {num_test} test nodes")
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    val[rest[:num_val]] = True
    test[rest[num_val:num_val + num_test]] = True
    return {"train": train, "val": val, "test": test}


def make_folds(labels: np.ndarray, k: int = 10, seed: int = 0) -> np.ndarray:
    """Stratified k-fold assignment: an integer in [0, k) per item.

    Per class, indices are shuffled and dealt round-robin starting at a
    class-dependent offset so remainders spread across folds. Classes with
    fewer than k members trigger an unstratified fallback (warned)."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    if k < 2 or k > n:
        raise DataValidationError(f"k={k} folds invalid for {n} items")
    rng = np.random.default_rng(seed)
    classes = np.unique(labels)
    if any((labels == c).sum() < k for c in classes):
        logger.warning("a class has fewer than %d members; "
                       "falling back to unstratified folds", k)
        assignment = np.empty(n, dtype=np.int64)
        order = rng.permutation(n)
        for pos, idx in enumerate(order):
            assignment[idx] = pos % k
        return assignment
    assignment = np.empty(n, dtype=np.int64)
    for offset, c in enumerate(classes):
        members = rng.permutation(np.flatnonzero(labels == c))
        for pos, idx in enumerate(members):
            assignment[idx] = (pos + offset) % k
    return assignment


# ---------------------------------------------------------------------------
# TU flat files and the closed-neighborhood hypergraph construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlainGraph:
    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    node_labels: tuple[int, ...] | None
    label: int


def _read_int_lines(path: Path) -> list[int]:
    try:
        return [int(line.strip().rstrip(","))
                for line in path.read_text().splitlines() if line.strip()]
    except ValueError as exc:
        raise DataValidationError(f"{path}: {exc}") from exc


def load_tu_dataset(directory, name: str | None = None) -> list[PlainGraph]:
    """Parse a TU-format directory (DS_A / DS_graph_indicator /
    DS_graph_labels, optional DS_node_labels) into plain graphs."""
    directory = Path(directory)
    if name is None:
        name = directory.name
    prefix = directory / name
    adjacency_path = Path(f"{prefix}_A.txt")
    indicator_path = Path(f"{prefix}_graph_indicator.txt")
    graph_labels_path = Path(f"{prefix}_graph_labels.txt")
    node_labels_path = Path(f"{prefix}_node_labels.txt")
    for p in (adjacency_path, indicator_path, graph_labels_path):
        if not p.exists():
            raise DataValidationError(f"missing TU file {p}")

    indicator = _read_int_lines(indicator_path)      # 1-based graph id per node
    graph_labels_raw = _read_int_lines(graph_labels_path)
    num_graphs = len(graph_labels_raw)
    num_nodes_total = len(indicator)
    if num_nodes_total == 0:
        raise DataValidationError(f"{indicator_path}: no nodes")
    if min(indicator) < 1 or max(indicator) > num_graphs:
        raise DataValidationError(
            f"{indicator_path}: graph ids must lie in [1, {num_graphs}]")
    counts = np.bincount(np.asarray(indicator), minlength=num_graphs + 1)[1:]
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise DataValidationError(
            f"graph record(s) {(empty + 1).tolist()} have no nodes")

    # global node id -> (graph index, local node id)
    local_index = np.empty(num_nodes_total, dtype=np.int64)
    graph_of = np.asarray(indicator, dtype=np.int64) - 1
    next_local = np.zeros(num_graphs, dtype=np.int64)
    for v in range(num_nodes_total):
        g = graph_of[v]
        local_index[v] = next_local[g]
        next_local[g] += 1

    edges_per_graph: list[set[tuple[int, int]]] = [set() for _ in range(num_graphs)]
    for line_no, line in enumerate(adjacency_path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            a_s, b_s = line.replace(",", " ").split()
            a, b = int(a_s), int(b_s)
        except ValueError as exc:
            raise DataValidationError(
                f"{adjacency_path}:{line_no}: malformed edge {line!r}") from exc
        if not (1 <= a <= num_nodes_total and 1 <= b <= num_nodes_total):
            raise DataValidationError(
                f"{adjacency_path}:{line_no}: node id outside [1, {num_nodes_total}]")
        ga, gb = graph_of[a - 1], graph_of[b - 1]
        if ga != gb:
            raise DataValidationError(
                f"{adjacency_path}:{line_no}: edge crosses graphs {ga + 1} and {gb + 1}")
        u, w = int(local_index[a - 1]), int(local_index[b - 1])
        if u == w:
            continue  # self loops are implicit in the closed neighborhood
        edges_per_graph[ga].add((min(u, w), max(u, w)))

    node_labels_all = None
    if node_labels_path.exists():
        node_labels_all = _read_int_lines(node_labels_path)
        if len(node_labels_all) != num_nodes_total:
            raise DataValidationError(
                f"{node_labels_path}: {len(node_labels_all)} labels "
                f"for {num_nodes_total} nodes")

    label_values = sorted(set(graph_labels_raw))
    label_map = {v: i for i, v in enumerate(label_values)}

    graphs = []
    for g in range(num_graphs):
        members = np.flatnonzero(graph_of == g)
        node_labels = None
        if node_labels_all is not None:
            node_labels = tuple(node_labels_all[v] for v in members)
        graphs.append(PlainGraph(
            num_nodes=int(counts[g]),
            edges=tuple(sorted(edges_per_graph[g])),
            node_labels=node_labels,
            label=label_map[graph_labels_raw[g]],
        ))
    return graphs


def graph_to_hypergraph(graph: PlainGraph) -> Hypergraph:
    """Closed-neighborhood construction: one hyperedge per node v containing
    v and its neighbors, so |E| = |V|. Isolated nodes yield singletons."""
    neighborhoods = [{v} for v in range(graph.num_nodes)]
    for u, w in graph.edges:
        neighborhoods[u].add(w)
        neighborhoods[w].add(u)
    return Hypergraph(graph.num_nodes,
                      tuple(tuple(sorted(nb)) for nb in neighborhoods))


def tu_graph_dataset(directory, name: str | None = None,
                     degree_cap: int = 32) -> GraphDataset:
    """Load a TU directory and build the hypergraph classification dataset.

    Node features are one-hot node labels when the corpus provides them,
    otherwise one-hot node degree clipped at ``degree_cap``."""
    directory = Path(directory)
    if name is None:
        name = directory.name
    graphs = load_tu_dataset(directory, name)
    have_labels = all(g.node_labels is not None for g in graphs)
    if have_labels:
        values = sorted({lbl for g in graphs for lbl in g.node_labels})
        value_map = {v: i for i, v in enumerate(values)}
        width = len(values)
    else:
        width = degree_cap + 1

    samples = []
    for g in graphs:
        X = np.zeros((g.num_nodes, width), dtype=np.float64)
        if have_labels:
            for v, lbl in enumerate(g.node_labels):
                X[v, value_map[lbl]] = 1.0
        else:
            degree = np.zeros(g.num_nodes, dtype=np.int64)
            for u, w in g.edges:
                degree[u] += 1
                degree[w] += 1
            for v in range(g.num_nodes):
                X[v, min(int(degree[v]), degree_cap)] = 1.0
        samples.append(GraphSample(graph_to_hypergraph(g), X, g.label))
    num_classes = len({g.label for g in graphs})
    return GraphDataset(name, tuple(samples), num_classes, width)


# ---------------------------------------------------------------------------
# synthetic stand-ins (demos and integration tests; no external files)
# ---------------------------------------------------------------------------

def synthetic_node_dataset(seed: int = 0, num_nodes: int = 60,
                           num_classes: int = 3, num_features: int = 12,
                           edges_per_class: int = 6, edge_size: int = 5,
                           noise_edges: int = 6, feature_noise: float = 0.6,
                           train_per_class: int = 5, num_val: int = 12,
                           num_test: int = 18) -> NodeDataset:
    """A planted-partition hypergraph with noisy class features.

    Hyperedges mostly join same-class nodes, plus a handful of cross-class
    noise edges; features are a class centroid plus Gaussian noise. Clearly a
    stand-in: it exercises the full pipeline at desk scale without any
    external corpus."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, num_classes, size=num_nodes)
    for c in range(num_classes):  # every class populated
        labels[c::num_classes][:1] = c
    centroids = rng.normal(size=(num_classes, num_features))
    features = centroids[labels] + feature_noise * rng.normal(
        size=(num_nodes, num_features))

    hyperedges = []
    for c in range(num_classes):
        members = np.flatnonzero(labels == c)
        for _ in range(edges_per_class):
            size = min(edge_size, members.size)
            hyperedges.append(tuple(rng.choice(members, size=size, replace=False)))
    for _ in range(noise_edges):
        hyperedges.append(tuple(rng.choice(num_nodes, size=edge_size,
                                           replace=False)))
    hg, _ = patch_isolated_nodes(Hypergraph(num_nodes, tuple(hyperedges)))
    masks = semi_supervised_split(labels, seed=seed,
                                  train_per_class=train_per_class,
                                  num_val=num_val, num_test=num_test)
    return NodeDataset(f"synthetic-node-{seed}", hg, features, labels, masks)


def synthetic_graph_dataset(seed: int = 0, num_graphs: int = 40,
                            num_classes: int = 2, nodes_range=(6, 12),
                            num_features: int = 8) -> GraphDataset:
    """Small random graphs whose label is encoded in edge density and a
    feature offset; a stand-in for TU corpora."""
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(num_graphs):
        label = i % num_classes
        n = int(rng.integers(*nodes_range))
        p = 0.25 + 0.4 * (label / max(1, num_classes - 1))
        edges = {(u, v) for u in range(n) for v in range(u + 1, n)
                 if rng.random() < p}
        graph = PlainGraph(n, tuple(sorted(edges)), None, label)
        X = rng.normal(size=(n, num_features)) + 0.8 * label
        samples.append(GraphSample(graph_to_hypergraph(graph), X, label))
    return GraphDataset(f"synthetic-graph-{seed}", tuple(samples),
                        num_classes, num_features)
