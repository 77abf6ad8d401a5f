"""Hypergraph convolutional networks with a learnable incidence adaptor.

The package is layered bottom-up:

- autodiff: dense float64 tensors on a reverse-mode tape
- hypergraph: fixed topology, degrees, propagation matrix N, Laplacian L
- adaptor: the learnable soft incidence and its residual blend
- model: HGNN-style layer stacks and readouts
- data: canonical corpora, TU parsing, folds, synthetic stand-ins
- train / optim / cli: loops, optimizers, command line
"""

from .adaptor import (HeraldOutput, HeraldParams, a_schedule, herald_forward,
                      topology_regularizer)
from .autodiff import Tape, Tensor, finite_checks, set_finite_checks
from .data import (GraphDataset, NodeDataset, graph_to_hypergraph,
                   load_node_dataset, make_folds, save_node_dataset,
                   semi_supervised_split, synthetic_graph_dataset,
                   synthetic_node_dataset, tu_graph_dataset)
from .errors import (ConfigError, ContractError, DataValidationError,
                     DegenerateNodeError, HeraldNetError, NumericalError,
                     ShapeError)
from .hypergraph import (Hypergraph, SpectralOperators, degrees, eigen_check,
                         laplacian, patch_isolated_nodes, propagation_matrix,
                         spectral_operators)
from .model import HGNNModel, LayerSpec, ModelConfig
from .train import (CrossValidationResult, RunRecord, TrainConfig, accuracy,
                    evaluate, evaluate_graphs, train_graph, train_node)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Tape", "Tensor", "finite_checks", "set_finite_checks",
    "Hypergraph", "SpectralOperators", "degrees", "propagation_matrix",
    "laplacian", "eigen_check", "spectral_operators", "patch_isolated_nodes",
    "HeraldParams", "HeraldOutput", "herald_forward", "a_schedule",
    "topology_regularizer",
    "HGNNModel", "ModelConfig", "LayerSpec",
    "NodeDataset", "GraphDataset", "load_node_dataset", "save_node_dataset",
    "graph_to_hypergraph", "tu_graph_dataset", "make_folds",
    "semi_supervised_split", "synthetic_node_dataset",
    "synthetic_graph_dataset",
    "TrainConfig", "RunRecord", "CrossValidationResult", "train_node",
    "train_graph", "evaluate", "evaluate_graphs", "accuracy",
    "HeraldNetError", "ShapeError", "ContractError", "ConfigError",
    "NumericalError", "DataValidationError", "DegenerateNodeError",
]
