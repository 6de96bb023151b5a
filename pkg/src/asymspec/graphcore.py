"""Sparse graph storage, normalized graph operators and graph statistics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp

from .exceptions import DomainError, InputError

logger = logging.getLogger(__name__)

Variant = Literal[
    "norm_laplacian",
    "shifted_norm_laplacian",
    "norm_adjacency",
    "norm_adjacency_selfloop",
]
VARIANTS: tuple[str, ...] = (
    "norm_laplacian",
    "shifted_norm_laplacian",
    "norm_adjacency",
    "norm_adjacency_selfloop",
)


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Canonical CSR matrix (sorted, duplicate-free column indices per row).

    Instances are immutable; the arrays are flagged read-only on construction.
    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _csr: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        offsets = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        cols = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if offsets.shape != (self.n_rows + 1,):
            raise InputError("row_offsets must have length n_rows + 1")
        if offsets[0] != 0 or offsets[-1] != len(vals) or len(cols) != len(vals):
            raise InputError("row_offsets inconsistent with values")
        if np.any(np.diff(offsets) < 0):
            raise InputError("row_offsets must be non-decreasing")
        if len(cols) and (cols.min() < 0 or cols.max() >= self.n_cols):
            raise InputError("column index out of range")
        # strictly increasing columns inside each row
        if len(cols) > 1:
            step = np.diff(cols)
            row_starts = np.zeros(len(cols), dtype=bool)
            row_starts[offsets[:-1][offsets[:-1] < len(cols)]] = True
            if np.any((step <= 0) & ~row_starts[1:]):
                raise InputError("column indices must be strictly increasing within a row")
        for arr in (offsets, cols, vals):
            arr.setflags(write=False)
        object.__setattr__(self, "row_offsets", offsets)
        object.__setattr__(self, "col_indices", cols)
        object.__setattr__(self, "values", vals)
        csr = sp.csr_matrix((vals, cols, offsets), shape=(self.n_rows, self.n_cols))
        csr.has_canonical_format = True
        object.__setattr__(self, "_csr", csr)

    @classmethod
    def from_scipy(cls, m) -> "SparseMatrix":
        m = sp.csr_matrix(m, dtype=np.float64)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def to_scipy(self) -> sp.csr_matrix:
        return self._csr

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def __neg__(self) -> "SparseMatrix":
        return SparseMatrix(self.n_rows, self.n_cols, self.row_offsets, self.col_indices, -self.values)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected node-attributed graph.

    ``edges`` holds each undirected edge once as ``(i, j)`` with ``i < j``;
    self-loops in the input are dropped. ``features`` may be a dense array or
    a scipy sparse matrix (bag-of-words datasets are mostly zeros).
    """

    n_nodes: int
    edges: np.ndarray
    features: object
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        edges = canonical_edges(self.edges, self.n_nodes)
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (self.n_nodes,):
            raise InputError(f"expected {self.n_nodes} labels, got {labels.shape[0]}")
        if len(labels) and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise InputError(f"labels must lie in [0, {self.n_classes})")
        if self.features.shape[0] != self.n_nodes:
            raise InputError(
                f"feature matrix has {self.features.shape[0]} rows, graph has {self.n_nodes} nodes"
            )
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "labels", labels)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def canonical_edges(edges, n: int) -> np.ndarray:
    """Deduplicated ``(min, max)`` pairs with self-loops removed, sorted."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(e) and (e.min() < 0 or e.max() >= n):
        bad = e[(e < 0).any(axis=1) | (e >= n).any(axis=1)][0]
        raise InputError(f"edge endpoint out of range for n={n}: {tuple(bad)}")
    e = np.sort(e, axis=1)
    e = e[e[:, 0] != e[:, 1]]
    return np.unique(e, axis=0) if len(e) else e.reshape(0, 2)


def build_csr(edges, n: int, with_self_loops: bool = False) -> SparseMatrix:
    """Symmetric 0/1 adjacency of an undirected edge list in canonical CSR."""
    e = canonical_edges(edges, n)
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    if with_self_loops:
        loops = np.arange(n, dtype=np.int64)
        rows = np.concatenate([rows, loops])
        cols = np.concatenate([cols, loops])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.add.at(offsets, rows + 1, 1)
    return SparseMatrix(n, n, np.cumsum(offsets), cols, np.ones(len(cols)))


def _inv_sqrt(deg: np.ndarray) -> np.ndarray:
    out = np.zeros_like(deg, dtype=np.float64)
    nz = deg > 0
    out[nz] = 1.0 / np.sqrt(deg[nz])
    return out


def graph_matrix(g: Graph, variant: Variant) -> SparseMatrix:
    """One of the four normalized operators used by the filter families.

    ``norm_laplacian``          I - D^-1/2 A D^-1/2
    ``shifted_norm_laplacian``  -D^-1/2 A D^-1/2
    ``norm_adjacency``          D^-1/2 A D^-1/2
    ``norm_adjacency_selfloop`` (D+I)^-1/2 (A+I) (D+I)^-1/2

    Isolated nodes get a zero D^-1/2 entry.
    """
    if g.n_nodes == 0:
        raise InputError("graph has no nodes")
    if variant not in VARIANTS:
        raise InputError(f"unknown graph matrix variant {variant!r}")
    n = g.n_nodes
    if variant == "norm_adjacency_selfloop":
        a = build_csr(g.edges, n, with_self_loops=True)
    else:
        a = build_csr(g.edges, n)
    deg = np.diff(a.row_offsets).astype(np.float64)
    d = _inv_sqrt(deg)
    rows = np.repeat(np.arange(n), np.diff(a.row_offsets))
    vals = d[rows] * a.values * d[a.col_indices]
    adj = SparseMatrix(n, n, a.row_offsets, a.col_indices, vals)
    if variant in ("norm_adjacency", "norm_adjacency_selfloop"):
        return adj
    if variant == "shifted_norm_laplacian":
        return -adj
    return SparseMatrix.from_scipy(sp.identity(n, format="csr") - adj.to_scipy())


def spmm(m: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """Sparse-dense product ``m @ x``.

    Rows are accumulated in ascending column order (canonical CSR), so the
    result is bitwise reproducible.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != m.n_cols:
        raise InputError(f"spmm shape mismatch: matrix {m.shape}, operand {x.shape}")
    return m.to_scipy() @ x


def edge_homophily(g: Graph) -> float:
    """Fraction of undirected edges whose endpoints share a label."""
    if g.n_edges == 0:
        raise DomainError("edge homophily is undefined for a graph without edges")
    same = g.labels[g.edges[:, 0]] == g.labels[g.edges[:, 1]]
    return float(np.mean(same))


def spectral_radius(m: SparseMatrix) -> float:
    """Largest absolute eigenvalue of a symmetric operator."""
    if m.n_rows <= 64:
        return float(np.max(np.abs(np.linalg.eigvalsh(m.toarray()))))
    from scipy.sparse.linalg import eigsh

    vals = eigsh(m.to_scipy(), k=1, which="LM", return_eigenvectors=False, tol=1e-8)
    return float(abs(vals[0]))


def check_chebyshev_domain(m: SparseMatrix, tol: float = 1e-9) -> bool:
    """Warn when the Chebyshev input operator leaves the [-1, 1] band."""
    r = spectral_radius(m)
    if r > 1.0 + tol:
        logger.warning("operator spectral radius %.6g exceeds 1; Chebyshev recursion may blow up", r)
        return False
    return True
