"""Spectral graph neural networks with asymmetric gradient preconditioning."""

from .basis import FAMILIES, FilterSpec, apply_filter, chebii_effective_coeffs, jacobi_recursion_coeffs
from .estimator import SpectralGNNClassifier
from .exceptions import (
    AsymSpecError,
    ConfigError,
    DomainError,
    InputError,
    LoadError,
    NumericError,
    ParameterError,
)
from .graphcore import Graph, SparseMatrix, build_csr, edge_homophily, graph_matrix, spmm
from .model import GNNObjective, GradientBundle, ModelParams, backward, empirical_loss, forward, init_params
from .optim import OptimizerState, PreconditionerState, TrainConfig, TrainResult, asymmetric_train, gpnr

__version__ = "0.1.0"

__all__ = [
    "FAMILIES",
    "AsymSpecError",
    "ConfigError",
    "DomainError",
    "FilterSpec",
    "GNNObjective",
    "Graph",
    "GradientBundle",
    "InputError",
    "LoadError",
    "ModelParams",
    "NumericError",
    "OptimizerState",
    "ParameterError",
    "PreconditionerState",
    "SparseMatrix",
    "SpectralGNNClassifier",
    "TrainConfig",
    "TrainResult",
    "apply_filter",
    "asymmetric_train",
    "backward",
    "build_csr",
    "chebii_effective_coeffs",
    "edge_homophily",
    "empirical_loss",
    "forward",
    "gpnr",
    "graph_matrix",
    "init_params",
    "jacobi_recursion_coeffs",
    "spmm",
]
