"""Training loops, loss assembly, evaluation and run records.

The node task trains on a single hypergraph with masked cross-entropy plus
the weighted topology regularizer summed over every adaptor pass; the model
snapshot with the best validation accuracy supplies the reported test
accuracy. The graph task runs stratified k-fold cross-validation with one
optimizer step per graph and reports mean and population std of the fold
test accuracies.

RunRecords serialize to JSON and reload to equal values; everything except
wall time is a pure function of (config, seed, dataset).
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tape
from .data import GraphDataset, NodeDataset, make_folds
from .errors import ConfigError, ContractError, NumericalError
from .hypergraph import spectral_operators
from .model import HGNNModel, ModelConfig
from .optim import build_optimizer


@dataclass
class TrainConfig:
    """Optimization and evaluation policy (architecture lives in ModelConfig)."""

    optimizer: str = "adam"
    lr: float = 1e-3
    weight_decay: float = 5e-4
    epochs: int = 300
    patience: int = 50        # early stop on validation accuracy; 0 disables
    seed: int = 0
    reg_weight: float = 0.1   # topology regularizer loss weight
    folds: int = 10           # graph task only

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.reg_weight < 0:
            raise ConfigError(f"reg_weight must be >= 0, got {self.reg_weight}")
        if self.patience < 0:
            raise ConfigError(f"patience must be >= 0, got {self.patience}")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")


@dataclass
class RunRecord:
    """Per-epoch metrics plus the final result of one training run."""

    task: str
    dataset: str
    seed: int
    config: dict
    epochs: list[dict] = field(default_factory=list)
    test_accuracy: float = 0.0
    best_val_accuracy: float = 0.0
    best_epoch: int = 0
    wall_time: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls(**json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "RunRecord":
        return cls.from_json(Path(path).read_text())


def accuracy(logits: np.ndarray, labels: np.ndarray,
             mask: np.ndarray | None = None) -> float:
    """Fraction of argmax predictions matching labels, over ``mask`` rows."""
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise ContractError("accuracy over an empty mask")
        logits, labels = logits[mask], labels[mask]
    if logits.shape[0] == 0:
        raise ContractError("accuracy over an empty selection")
    return float((np.argmax(logits, axis=1) == labels).mean())


def evaluate(model: HGNNModel, dataset: NodeDataset, mask_name: str,
             operators=None) -> float:
    """Node-task accuracy over a named split mask (no tape, no dropout)."""
    mask = dataset.masks.get(mask_name)
    if mask is None or not mask.any():
        raise ContractError(f"dataset has no populated mask {mask_name!r}")
    logits = model.forward_node(dataset.features, dataset.hypergraph,
                                operators=operators, training=False)
    return accuracy(logits.data, dataset.labels, mask)


def _loss_with_reg(logits, regs, labels, mask, reg_weight: float):
    loss = ad.masked_cross_entropy(logits, labels, mask)
    for reg in regs:
        loss = ad.add(loss, ad.scale(reg, reg_weight))
    return loss


def _check_loss(loss_value: float, epoch: int, model: HGNNModel) -> None:
    if np.isfinite(loss_value):
        return
    norms = {name: float(np.abs(t.data).max(initial=0.0))
             for name, t in model.parameters()}
    worst = sorted(norms, key=norms.get, reverse=True)[:4]
    raise NumericalError(
        f"non-finite loss at epoch {epoch}; largest parameter magnitudes: "
        + ", ".join(f"{n}={norms[n]:.3e}" for n in worst))


def train_node(dataset: NodeDataset, model_config: ModelConfig,
               train_config: TrainConfig,
               epoch_callback=None) -> tuple[HGNNModel, RunRecord]:
    """Semi-supervised node classification on one hypergraph."""
    for required in ("train", "val", "test"):
        if required not in dataset.masks or not dataset.masks[required].any():
            raise ContractError(f"node training needs a populated "
                                f"{required!r} mask")
    start = time.perf_counter()
    model = HGNNModel(model_config, seed=train_config.seed)
    operators = spectral_operators(dataset.hypergraph)
    optimizer = build_optimizer(train_config.optimizer, model.parameters(),
                                train_config.lr, train_config.weight_decay)
    record = RunRecord(task="node", dataset=dataset.name,
                       seed=train_config.seed,
                       config={"model": asdict(model_config),
                               "train": asdict(train_config)})
    best_val = -1.0
    best_state = model.state()
    best_epoch = 0
    since_best = 0
    for epoch in range(1, train_config.epochs + 1):
        with Tape() as tape:
            logits, regs = model.forward_node(
                dataset.features, dataset.hypergraph, operators=operators,
                training=True, with_reg=True)
            loss = _loss_with_reg(logits, regs, dataset.labels,
                                  dataset.masks["train"],
                                  train_config.reg_weight)
        loss_value = loss.item()
        _check_loss(loss_value, epoch, model)
        model.zero_grad()
        tape.backward(loss)
        optimizer.step()

        val_acc = evaluate(model, dataset, "val", operators)
        record.epochs.append(
            {"epoch": epoch, "train_loss": loss_value, "val_accuracy": val_acc})
        if epoch_callback is not None:
            epoch_callback(record.epochs[-1])
        if val_acc > best_val:
            best_val = val_acc
            best_state = model.state()
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if train_config.patience and since_best >= train_config.patience:
                break
    model.load_state(best_state)
    record.best_val_accuracy = best_val
    record.best_epoch = best_epoch
    record.test_accuracy = evaluate(model, dataset, "test", operators)
    record.wall_time = time.perf_counter() - start
    return model, record


@dataclass
class CrossValidationResult:
    dataset: str
    fold_accuracies: list[float]
    mean_accuracy: float
    std_accuracy: float   # population std, matching reported mean +/- std
    records: list[RunRecord]

    def summary(self) -> dict:
        return {"dataset": self.dataset,
                "fold_accuracies": self.fold_accuracies,
                "mean_accuracy": self.mean_accuracy,
                "std_accuracy": self.std_accuracy}


def _train_graph_fold(samples, train_idx, model_config: ModelConfig,
                      train_config: TrainConfig, fold_seed: int) -> HGNNModel:
    model = HGNNModel(model_config, seed=fold_seed)
    optimizer = build_optimizer(train_config.optimizer, model.parameters(),
                                train_config.lr, train_config.weight_decay)
    rng = np.random.default_rng((fold_seed, 0x5E))
    operators = [spectral_operators(s.hypergraph) for s in samples]
    for epoch in range(1, train_config.epochs + 1):
        epoch_loss = 0.0
        for idx in rng.permutation(train_idx):
            sample = samples[idx]
            with Tape() as tape:
                logits, regs = model.forward_graph(
                    sample.features, sample.hypergraph,
                    operators=operators[idx], training=True, with_reg=True)
                loss = _loss_with_reg(
                    logits, regs, np.array([sample.label]),
                    np.array([True]), train_config.reg_weight)
            loss_value = loss.item()
            _check_loss(loss_value, epoch, model)
            model.zero_grad()
            tape.backward(loss)
            optimizer.step()
            epoch_loss += loss_value
    return model


def evaluate_graphs(model: HGNNModel, dataset: GraphDataset,
                    indices) -> float:
    indices = np.asarray(indices)
    if indices.size == 0:
        raise ContractError("evaluate_graphs over an empty fold")
    correct = 0
    for idx in indices:
        sample = dataset.samples[int(idx)]
        logits = model.forward_graph(sample.features, sample.hypergraph,
                                     training=False)
        correct += int(np.argmax(logits.data[0]) == sample.label)
    return correct / indices.size


def train_graph(dataset: GraphDataset, model_config: ModelConfig,
                train_config: TrainConfig,
                fold_callback=None) -> CrossValidationResult:
    """k-fold cross-validation for hypergraph classification."""
    if model_config.readout != "sum":
        raise ConfigError("graph task requires readout='sum'")
    labels = dataset.labels()
    assignment = make_folds(labels, k=train_config.folds,
                            seed=train_config.seed)
    fold_accuracies = []
    records = []
    for fold in range(train_config.folds):
        start = time.perf_counter()
        test_idx = np.flatnonzero(assignment == fold)
        train_idx = np.flatnonzero(assignment != fold)
        fold_seed = train_config.seed * 1000 + fold
        model = _train_graph_fold(dataset.samples, train_idx, model_config,
                                  train_config, fold_seed)
        acc = evaluate_graphs(model, dataset, test_idx)
        fold_accuracies.append(acc)
        record = RunRecord(task="graph", dataset=dataset.name, seed=fold_seed,
                           config={"model": asdict(model_config),
                                   "train": asdict(train_config),
                                   "fold": fold})
        record.test_accuracy = acc
        record.wall_time = time.perf_counter() - start
        records.append(record)
        if fold_callback is not None:
            fold_callback(fold, acc)
    mean = float(np.mean(fold_accuracies))
    std = float(np.std(fold_accuracies))
    return CrossValidationResult(dataset.name, fold_accuracies, mean, std,
                                 records)
