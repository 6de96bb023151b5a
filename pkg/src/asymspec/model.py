"""Spectral GNN ``logits = g_theta(M) f_W(X)`` with exact gradients.

``f_W`` is a two-layer MLP with ReLU. Softmax is fused into the loss.
Parameters split into two blocks: the filter coefficients ``theta`` and the
feature transformation ``W = (w1, b1, w2, b2)``; biases belong to ``W``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np
import scipy.sparse as sp

from .basis import FilterSpec, apply_filter
from .exceptions import InputError, NumericError
from .graphcore import SparseMatrix


@dataclass
class BlockParams:
    """Named arrays split into a ``theta`` block and a ``W`` block.

    Subclasses list their W-block fields in ``w_fields``; the flat layout is
    ``[theta; vec(w_fields[0]); vec(w_fields[1]); ...]`` with row-major vec.
    """

    theta: np.ndarray
    w_fields: ClassVar[tuple[str, ...]] = ()

    def names(self) -> tuple[str, ...]:
        return ("theta",) + self.w_fields

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, f) for f in self.names()]

    def w_arrays(self) -> list[np.ndarray]:
        return [getattr(self, f) for f in self.w_fields]

    def theta_norm(self) -> float:
        return float(np.linalg.norm(self.theta))

    def w_norm(self) -> float:
        return float(np.sqrt(sum(np.sum(a * a) for a in self.w_arrays())))

    @property
    def d_theta(self) -> int:
        return self.theta.size

    @property
    def d_w(self) -> int:
        return sum(a.size for a in self.w_arrays())

    @property
    def size(self) -> int:
        return self.d_theta + self.d_w

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unflatten(self, vec: np.ndarray):
        """New instance of the same shapes filled from a flat vector."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.size,):
            raise InputError(f"flat vector has shape {vec.shape}, expected ({self.size},)")
        kw, pos = {}, 0
        for name, a in zip(self.names(), self.arrays()):
            kw[name] = vec[pos : pos + a.size].reshape(a.shape).copy()
            pos += a.size
        return type(self)(**kw)

    def map(self, fn, *others):
        kw = {
            name: fn(getattr(self, name), *(getattr(o, name) for o in others))
            for name in self.names()
        }
        return type(self)(**kw)

    def copy(self):
        return self.map(np.copy)

    def scale_blocks(self, s_theta: float, s_w: float):
        kw = {"theta": s_theta * self.theta}
        kw.update({f: s_w * getattr(self, f) for f in self.w_fields})
        return type(self)(**kw)

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def bitwise_equal(self, other) -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))


@dataclass
class ModelParams(BlockParams):
    w1: np.ndarray = None
    b1: np.ndarray = None
    w2: np.ndarray = None
    b2: np.ndarray = None
    w_fields: ClassVar[tuple[str, ...]] = ("w1", "b1", "w2", "b2")


class GradientBundle(ModelParams):
    """Gradients laid out exactly like :class:`ModelParams`."""


@dataclass
class ForwardCache:
    x_in: object  # input after dropout
    pre1: np.ndarray
    hidden: np.ndarray  # relu output after dropout
    mask_in: object
    mask_hidden: np.ndarray | None
    h: np.ndarray
    basis: np.ndarray
    logits: np.ndarray
    spec: FilterSpec
    m: SparseMatrix


def init_params(
    seed,
    d: int,
    hidden: int,
    n_classes: int,
    order: int,
    family: str = "chebyshev",
    init_alpha: float | None = None,
) -> ModelParams:
    """Glorot-uniform MLP weights, zero biases, family-specific filter init.

    The monomial family (and any family given ``init_alpha``) starts from the
    geometric sequence ``alpha (1-alpha)^k`` with the last term ``(1-alpha)^K``;
    the others start at the identity-like ``theta = e_0``.
    """
    if min(d, hidden, n_classes) <= 0 or order < 0:
        raise InputError("dimensions must be positive")
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    w1 = glorot(d, hidden)
    w2 = glorot(hidden, n_classes)
    alpha = init_alpha
    if alpha is None and family == "monomial":
        alpha = 0.1
    if alpha is None:
        theta = np.zeros(order + 1)
        theta[0] = 1.0
    else:
        k = np.arange(order + 1)
        theta = alpha * (1.0 - alpha) ** k
        theta[-1] = (1.0 - alpha) ** order
    return ModelParams(theta=theta, w1=w1, b1=np.zeros(hidden), w2=w2, b2=np.zeros(n_classes))


def _dropout_mask(rng: np.random.Generator, shape, rate: float) -> np.ndarray:
    keep = 1.0 - rate
    return (rng.random(shape) < keep) / keep


def forward(
    p: ModelParams,
    spec: FilterSpec,
    m: SparseMatrix,
    x,
    *,
    train: bool = False,
    input_dropout: float = 0.0,
    hidden_dropout: float = 0.0,
    seed=None,
) -> tuple[np.ndarray, ForwardCache]:
    """``dropout(relu(dropout(x) w1 + b1)) w2 + b2`` then the graph filter.

    Dropout is inverted (scaled at train time) and only active with ``train``.
    """
    if x.shape[0] != m.n_rows or x.shape[1] != p.w1.shape[0]:
        raise InputError(f"features {x.shape} incompatible with operator {m.shape} / w1 {p.w1.shape}")
    rng = np.random.default_rng(seed)
    mask_in = mask_hidden = None
    x_in = x
    if train and input_dropout > 0:
        if sp.issparse(x):
            x_csr = sp.csr_matrix(x, copy=True)
            mask_in = _dropout_mask(rng, x_csr.data.shape, input_dropout)
            x_csr.data = x_csr.data * mask_in
            x_in = x_csr
        else:
            mask_in = _dropout_mask(rng, x.shape, input_dropout)
            x_in = x * mask_in
    pre1 = np.asarray(x_in @ p.w1) + p.b1
    hidden = np.maximum(pre1, 0.0)
    if train and hidden_dropout > 0:
        mask_hidden = _dropout_mask(rng, hidden.shape, hidden_dropout)
        hidden = hidden * mask_hidden
    h = hidden @ p.w2 + p.b2
    if not np.all(np.isfinite(h)):
        raise NumericError("non-finite MLP activations")
    res = apply_filter(spec, p.theta, m, h)
    cache = ForwardCache(x_in, pre1, hidden, mask_in, mask_hidden, h, res.basis, res.output, spec, m)
    return res.output, cache


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def _check_mask(mask, n: int) -> np.ndarray:
    idx = np.asarray(mask)
    if idx.dtype == bool:
        idx = np.flatnonzero(idx)
    idx = idx.astype(np.int64)
    if idx.size == 0:
        raise InputError("loss mask is empty")
    if idx.min() < 0 or idx.max() >= n:
        raise InputError("mask index out of range")
    return idx


def empirical_loss(logits: np.ndarray, labels, mask) -> float:
    """Mean softmax cross-entropy over the masked nodes."""
    idx = _check_mask(mask, logits.shape[0])
    labels = np.asarray(labels)
    lp = log_softmax(logits[idx])
    return float(-lp[np.arange(len(idx)), labels[idx]].mean())


def backward(p: ModelParams, cache: ForwardCache, labels, mask) -> GradientBundle:
    """Exact gradient of :func:`empirical_loss` for the forward pass in ``cache``."""
    logits = cache.logits
    idx = _check_mask(mask, logits.shape[0])
    labels = np.asarray(labels)
    g_out = np.zeros_like(logits)
    probs = softmax(logits[idx])
    probs[np.arange(len(idx)), labels[idx]] -= 1.0
    g_out[idx] = probs / len(idx)

    g_theta = np.array([np.sum(g_out * b) for b in cache.basis])
    # symmetric operator: g(M)^T = g(M)
    g_h = apply_filter(cache.spec, p.theta, cache.m, g_out).output
    g_w2 = cache.hidden.T @ g_h
    g_b2 = g_h.sum(axis=0)
    g_hidden = g_h @ p.w2.T
    if cache.mask_hidden is not None:
        g_hidden = g_hidden * cache.mask_hidden
    g_pre = g_hidden * (cache.pre1 > 0)
    g_w1 = np.asarray(cache.x_in.T @ g_pre)
    g_b1 = g_pre.sum(axis=0)
    return GradientBundle(theta=g_theta, w1=g_w1, b1=g_b1, w2=g_w2, b2=g_b2)


def predict_labels(logits: np.ndarray) -> np.ndarray:
    return np.argmax(logits, axis=1)


def accuracy(logits: np.ndarray, labels, mask) -> float:
    idx = _check_mask(mask, logits.shape[0])
    return float(np.mean(predict_labels(logits[idx]) == np.asarray(labels)[idx]))


@dataclass
class GNNObjective:
    """Loss/gradient evaluator for one graph, split and filter.

    ``train_loss_and_grad`` honors dropout; ``loss_and_grad`` is the
    deterministic eval-mode version used for Hessian probing.
    """

    spec: FilterSpec
    m: SparseMatrix
    x: object
    labels: np.ndarray
    train_idx: np.ndarray
    val_idx: np.ndarray | None = None
    input_dropout: float = 0.0
    hidden_dropout: float = 0.0

    def train_loss_and_grad(self, p: ModelParams, seed=None) -> tuple[float, GradientBundle]:
        train = self.input_dropout > 0 or self.hidden_dropout > 0
        logits, cache = forward(
            p, self.spec, self.m, self.x, train=train,
            input_dropout=self.input_dropout, hidden_dropout=self.hidden_dropout, seed=seed,
        )
        loss = empirical_loss(logits, self.labels, self.train_idx)
        return loss, backward(p, cache, self.labels, self.train_idx)

    def loss_and_grad(self, p: ModelParams) -> tuple[float, GradientBundle]:
        logits, cache = forward(p, self.spec, self.m, self.x)
        loss = empirical_loss(logits, self.labels, self.train_idx)
        return loss, backward(p, cache, self.labels, self.train_idx)

    def logits(self, p: ModelParams) -> np.ndarray:
        return forward(p, self.spec, self.m, self.x)[0]

    def val_loss(self, p: ModelParams) -> float:
        return empirical_loss(self.logits(p), self.labels, self.val_idx)

