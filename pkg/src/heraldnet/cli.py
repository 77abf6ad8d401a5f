"""Command-line interface.

Subcommands: train-node, train-graph, convert-dataset, eval-checkpoint,
report. Exit codes: 0 success, 2 usage/config error, 3 data validation
error, 4 numerical failure.

Datasets resolve either as literal paths or as names under the dataset root
(--data-root or the HERALDNET_DATA_ROOT environment variable): node corpora
as <root>/<name>.json canonical documents, TU corpora as <root>/<NAME>/
directories of flat files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .data import (NodeDataset, convert_hypergcn_release, load_node_dataset,
                   save_node_dataset, semi_supervised_split, tu_graph_dataset)
from .errors import (ConfigError, DataValidationError, HeraldNetError,
                     NumericalError)
from .model import HGNNModel, ModelConfig
from .train import RunRecord, TrainConfig, evaluate, train_graph, train_node

DATA_ROOT_ENV = "HERALDNET_DATA_ROOT"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _data_root(args) -> Path:
    root = getattr(args, "data_root", None) or os.environ.get(DATA_ROOT_ENV)
    return Path(root) if root else Path.cwd()


def _resolve_node_dataset(args) -> NodeDataset:
    candidate = Path(args.dataset)
    if candidate.exists():
        return load_node_dataset(candidate)
    named = _data_root(args) / f"{args.dataset}.json"
    if named.exists():
        return load_node_dataset(named)
    raise DataValidationError(
        f"node dataset {args.dataset!r} not found (looked at {candidate} "
        f"and {named}); set --data-root or ${DATA_ROOT_ENV}")


def _resolve_graph_dataset(args):
    candidate = Path(args.dataset)
    if candidate.is_dir():
        return tu_graph_dataset(candidate, degree_cap=args.degree_cap)
    named = _data_root(args) / args.dataset
    if named.is_dir():
        return tu_graph_dataset(named, degree_cap=args.degree_cap)
    raise DataValidationError(
        f"TU dataset directory {args.dataset!r} not found (looked at "
        f"{candidate} and {named}); set --data-root or ${DATA_ROOT_ENV}")


def _model_config(args, in_dim: int, num_classes: int,
                  readout: str) -> ModelConfig:
    herald_layers = None
    if args.herald_layers:
        herald_layers = tuple(int(x) for x in args.herald_layers.split(","))
    return ModelConfig(
        in_dim=in_dim,
        num_classes=num_classes,
        hidden_dim=args.hidden,
        num_layers=args.layers,
        herald_mode=args.herald,
        herald_layers=herald_layers,
        sigma=args.sigma,
        dropout=args.dropout,
        readout=readout,
        use_a_schedule=not args.fixed_a_enabled,
        fixed_a=args.fixed_a if args.fixed_a_enabled else 0.1,
    )


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        optimizer=args.optimizer,
        lr=args.lr,
        weight_decay=args.weight_decay,
        epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
        reg_weight=args.reg_weight,
        folds=getattr(args, "folds", 10),
    )


def _prepare_run_dir(args) -> Path:
    run_dir = Path(args.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def _add_shared_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True,
                   help="dataset path or name under the data root")
    p.add_argument("--data-root", default=None,
                   help=f"dataset root (default: ${DATA_ROOT_ENV} or cwd)")
    p.add_argument("--herald", choices=("off", "on", "fast"), default="off",
                   help="incidence adaptor mode")
    p.add_argument("--herald-layers", default=None,
                   help="comma-separated 1-based layer indices "
                        "(default: latter two layers)")
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=5e-4)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--patience", type=int, default=50)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=20.0)
    p.add_argument("--reg-weight", type=float, default=0.1)
    p.add_argument("--fixed-a", type=float, dest="fixed_a", default=None,
                   help="disable the cosine schedule and use this blend "
                        "strength at every adaptor layer")
    p.add_argument("--out", required=True, help="run directory")


def _postprocess_shared(args) -> None:
    args.fixed_a_enabled = args.fixed_a is not None
    if args.fixed_a is None:
        args.fixed_a = 0.1


def _write_run_outputs(run_dir: Path, record: RunRecord,
                       model: HGNNModel | None, summary: dict) -> None:
    (run_dir / "config.json").write_text(json.dumps(record.config))
    if model is not None:
        model.save(run_dir / "checkpoint.json")
    with (run_dir / "metrics.jsonl").open("w") as fh:
        for entry in record.epochs:
            fh.write(json.dumps(entry) + "\n")
    (run_dir / "summary.json").write_text(json.dumps(summary))


def cmd_train_node(args) -> int:
    _postprocess_shared(args)
    dataset = _resolve_node_dataset(args)
    model_cfg = _model_config(args, dataset.num_features,
                              dataset.num_classes, readout="none")
    train_cfg = _train_config(args)
    run_dir = _prepare_run_dir(args)

    def progress(entry):
        if entry["epoch"] % 20 == 0 or entry["epoch"] == 1:
            print(f"epoch {entry['epoch']:4d}  loss {entry['train_loss']:.4f}"
                  f"  val {entry['val_accuracy']:.4f}")

    model, record = train_node(dataset, model_cfg, train_cfg,
                               epoch_callback=progress)
    record.save(run_dir / "record.json")
    summary = {"task": "node", "dataset": dataset.name, "seed": train_cfg.seed,
               "herald": args.herald,
               "test_accuracy": record.test_accuracy,
               "best_val_accuracy": record.best_val_accuracy,
               "best_epoch": record.best_epoch,
               "wall_time": record.wall_time}
    _write_run_outputs(run_dir, record, model, summary)
    print(f"test accuracy {record.test_accuracy:.4f} "
          f"(best val {record.best_val_accuracy:.4f} "
          f"at epoch {record.best_epoch})")
    return EXIT_OK


def cmd_train_graph(args) -> int:
    _postprocess_shared(args)
    dataset = _resolve_graph_dataset(args)
    model_cfg = _model_config(args, dataset.num_features,
                              dataset.num_classes, readout="sum")
    train_cfg = _train_config(args)
    run_dir = _prepare_run_dir(args)

    def progress(fold, acc):
        print(f"fold {fold}: test accuracy {acc:.4f}")

    result = train_graph(dataset, model_cfg, train_cfg, fold_callback=progress)
    summary = {"task": "graph", "dataset": dataset.name,
               "seed": train_cfg.seed, "herald": args.herald,
               **result.summary()}
    (run_dir / "config.json").write_text(json.dumps(
        {"model": asdict(model_cfg), "train": asdict(train_cfg)}))
    with (run_dir / "metrics.jsonl").open("w") as fh:
        for record in result.records:
            fh.write(record.to_json() + "\n")
    (run_dir / "summary.json").write_text(json.dumps(summary))
    print(f"mean test accuracy {result.mean_accuracy:.4f} "
          f"+/- {result.std_accuracy:.4f} over {train_cfg.folds} folds")
    return EXIT_OK


def cmd_convert_dataset(args) -> int:
    dataset = convert_hypergcn_release(args.input, name=args.name)
    if args.split_seed is not None:
        masks = semi_supervised_split(dataset.labels, seed=args.split_seed,
                                      train_per_class=args.train_per_class,
                                      num_val=args.num_val,
                                      num_test=args.num_test)
        dataset = NodeDataset(dataset.name, dataset.hypergraph,
                              dataset.features, dataset.labels, masks)
    save_node_dataset(dataset, args.output)
    print(f"wrote {args.output}: |V|={dataset.hypergraph.num_nodes} "
          f"|E|={dataset.hypergraph.num_edges} "
          f"classes={dataset.num_classes}")
    return EXIT_OK


def cmd_eval_checkpoint(args) -> int:
    model = HGNNModel.load(args.checkpoint)
    if model.config.readout == "none":
        dataset = _resolve_node_dataset(args)
        for mask_name in sorted(dataset.masks):
            if dataset.masks[mask_name].any():
                acc = evaluate(model, dataset, mask_name)
                print(f"{mask_name} accuracy {acc:.4f}")
    else:
        dataset = _resolve_graph_dataset(args)
        from .train import evaluate_graphs
        acc = evaluate_graphs(model, dataset, np.arange(len(dataset)))
        print(f"accuracy {acc:.4f}")
    return EXIT_OK


def cmd_report(args) -> int:
    """Aggregate run summaries into a mean +/- std table grouped by
    (task, dataset, adaptor mode)."""
    groups: dict[tuple, list[float]] = {}
    for run_dir in args.runs:
        summary_path = Path(run_dir) / "summary.json"
        if not summary_path.exists():
            raise DataValidationError(f"no summary.json under {run_dir}")
        summary = json.loads(summary_path.read_text())
        key = (summary.get("task", "?"), summary.get("dataset", "?"),
               summary.get("herald", "?"))
        if "test_accuracy" in summary:
            groups.setdefault(key, []).append(summary["test_accuracy"])
        elif "mean_accuracy" in summary:
            groups.setdefault(key, []).append(summary["mean_accuracy"])
    if not groups:
        raise DataValidationError("no summaries found")
    print(f"{'task':<8}{'dataset':<28}{'herald':<8}{'runs':>5}"
          f"{'mean':>10}{'std':>10}")
    for key in sorted(groups):
        values = np.asarray(groups[key])
        task, dataset, herald = key
        print(f"{task:<8}{dataset:<28}{herald:<8}{len(values):>5}"
              f"{values.mean():>10.4f}{values.std():>10.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heraldnet",
        description="hypergraph convolution with a learnable incidence adaptor")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-node", help="semi-supervised node classification")
    _add_shared_train_flags(p)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.set_defaults(func=cmd_train_node)

    p = sub.add_parser("train-graph", help="graph classification with k-fold CV")
    _add_shared_train_flags(p)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--degree-cap", type=int, default=32,
                   help="degree one-hot cap when node labels are absent")
    p.set_defaults(func=cmd_train_graph)

    p = sub.add_parser("convert-dataset",
                       help="upstream pickled release -> canonical document")
    p.add_argument("--input", required=True, help="upstream release directory")
    p.add_argument("--output", required=True, help="canonical JSON path")
    p.add_argument("--name", default=None)
    p.add_argument("--split-seed", type=int, default=None,
                   help="also plant a train/val/test split")
    p.add_argument("--train-per-class", type=int, default=20)
    p.add_argument("--num-val", type=int, default=500)
    p.add_argument("--num-test", type=int, default=1000)
    p.set_defaults(func=cmd_convert_dataset)

    p = sub.add_parser("eval-checkpoint", help="evaluate a saved checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--data-root", default=None)
    p.add_argument("--degree-cap", type=int, default=32)
    p.set_defaults(func=cmd_eval_checkpoint)

    p = sub.add_parser("report", help="aggregate run summaries")
    p.add_argument("runs", nargs="+", help="run directories")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataValidationError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except HeraldNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    raise SystemExit(main())
