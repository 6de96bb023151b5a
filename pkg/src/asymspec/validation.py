"""Input checks shared by the estimator and the harness."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.utils.validation import check_array, column_or_1d

from .exceptions import InputError


def check_features(X):
    """Float64 feature matrix; sparse input is kept as CSR."""
    try:
        return check_array(X, accept_sparse="csr", dtype=np.float64, ensure_all_finite=True)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def check_labels(y, n_nodes: int) -> tuple[np.ndarray, int]:
    y = column_or_1d(y)
    if y.shape[0] != n_nodes:
        raise InputError(f"expected {n_nodes} labels, got {y.shape[0]}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise InputError("labels must be integer class indices")
        y = y.astype(np.int64)
    if y.min() < 0:
        raise InputError("labels must be non-negative")
    return y.astype(np.int64), int(y.max()) + 1


def check_index(idx, n_nodes: int, name: str) -> np.ndarray:
    if idx is None:
        raise InputError(f"{name} is required")
    a = np.asarray(idx)
    if a.dtype == bool:
        if a.shape != (n_nodes,):
            raise InputError(f"boolean {name} must have length {n_nodes}")
        a = np.flatnonzero(a)
    a = a.astype(np.int64).ravel()
    if a.size == 0:
        raise InputError(f"{name} is empty")
    if a.min() < 0 or a.max() >= n_nodes:
        raise InputError(f"{name} contains out-of-range node indices")
    if np.unique(a).size != a.size:
        raise InputError(f"{name} contains duplicate node indices")
    return a


def check_edges(edges, n_nodes: int) -> np.ndarray:
    e = np.asarray(edges)
    if e.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if e.ndim != 2 or e.shape[1] != 2:
        raise InputError(f"edges must be an (m, 2) array, got shape {e.shape}")
    if not np.issubdtype(e.dtype, np.integer):
        raise InputError("edge endpoints must be integers")
    if e.min() < 0 or e.max() >= n_nodes:
        raise InputError(f"edge endpoint out of range for {n_nodes} nodes")
    return e.astype(np.int64)


def maybe_sparse(X, density_threshold: float = 0.1):
    """Switch mostly-zero dense features to CSR for faster products."""
    if sp.issparse(X):
        return sp.csr_matrix(X)
    if X.size and np.count_nonzero(X) / X.size < density_threshold:
        return sp.csr_matrix(X)
    return X
