"""scikit-learn style wrapper around a transductive spectral GNN."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .basis import FilterSpec
from .exceptions import InputError
from .graphcore import Graph, check_chebyshev_domain, graph_matrix
from .hessian import BlockSpectrumSampler
from .model import GNNObjective, forward, init_params, softmax
from .optim import TrainConfig, asymmetric_train
from .validation import check_edges, check_features, check_index, check_labels, maybe_sparse


class SpectralGNNClassifier(ClassifierMixin, BaseEstimator):
    """Node classifier ``softmax(g_theta(M) MLP(X))`` trained on one graph.

    Training is transductive: ``fit`` receives the whole graph plus the
    train and validation node indices, and ``predict`` scores every node of a
    feature matrix on the same graph.

    Parameters
    ----------
    model : {"chebyshev", "chebyshev_ii", "jacobi", "monomial", "bernstein"}
    K : int
        Polynomial order; the filter has ``K + 1`` coefficients.
    asymmetric : bool
        Scale the two parameter blocks' gradients so they move at the same
        relative rate. ``False`` gives plain optimizer training.
    diagnostics_every : int
        If positive, probe the diagonal Hessian blocks every that many
        iterations and store them in ``train_result_.records``.
    """

    def __init__(
        self,
        model="chebyshev",
        K=10,
        hidden=64,
        optimizer="adam",
        lr_theta=0.01,
        lr_w=0.01,
        weight_decay_theta=5e-4,
        weight_decay_w=5e-4,
        input_dropout=0.5,
        hidden_dropout=0.5,
        asymmetric=True,
        beta_theta=0.9,
        beta_w=0.9,
        max_iter=1000,
        patience=200,
        jacobi_a=1.0,
        jacobi_b=1.0,
        init_alpha=None,
        scale_clamp=None,
        diagnostics_every=0,
        random_state=0,
    ):
        self.model = model
        self.K = K
        self.hidden = hidden
        self.optimizer = optimizer
        self.lr_theta = lr_theta
        self.lr_w = lr_w
        self.weight_decay_theta = weight_decay_theta
        self.weight_decay_w = weight_decay_w
        self.input_dropout = input_dropout
        self.hidden_dropout = hidden_dropout
        self.asymmetric = asymmetric
        self.beta_theta = beta_theta
        self.beta_w = beta_w
        self.max_iter = max_iter
        self.patience = patience
        self.jacobi_a = jacobi_a
        self.jacobi_b = jacobi_b
        self.init_alpha = init_alpha
        self.scale_clamp = scale_clamp
        self.diagnostics_every = diagnostics_every
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            optimizer=self.optimizer,
            lr_theta=self.lr_theta,
            lr_w=self.lr_w,
            weight_decay_theta=self.weight_decay_theta,
            weight_decay_w=self.weight_decay_w,
            beta_theta=self.beta_theta,
            beta_w=self.beta_w,
            t_max=self.max_iter,
            patience=self.patience,
            scale_clamp=self.scale_clamp,
        )

    def fit(self, X, y, *, edges, train_idx, val_idx=None):
        X = check_features(X)
        n = X.shape[0]
        y, n_classes = check_labels(y, n)
        edges = check_edges(edges, n)
        train_idx = check_index(train_idx, n, "train_idx")
        val_idx = train_idx if val_idx is None else check_index(val_idx, n, "val_idx")

        spec = FilterSpec(self.model, self.K, self.jacobi_a, self.jacobi_b)
        graph = Graph(n, edges, X, y, n_classes)
        m = graph_matrix(graph, spec.operator)
        if spec.family in ("chebyshev", "chebyshev_ii"):
            check_chebyshev_domain(m)
        x = maybe_sparse(X)
        objective = GNNObjective(
            spec, m, x, y, train_idx, val_idx, self.input_dropout, self.hidden_dropout
        )
        p0 = init_params(
            self.random_state, X.shape[1], self.hidden, n_classes, self.K, self.model, self.init_alpha
        )
        hook = None
        if self.diagnostics_every:
            hook = BlockSpectrumSampler(objective.loss_and_grad, seed=self.random_state)
        result = asymmetric_train(
            objective, p0, self._train_config(), precondition_on=self.asymmetric,
            seed=self.random_state, hook=hook, hook_every=self.diagnostics_every,
        )
        self.spec_ = spec
        self.operator_ = m
        self.params_ = result.best_params
        self.train_result_ = result
        self.classes_ = np.arange(n_classes)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        X = check_features(X)
        if X.shape[0] != self.operator_.n_rows:
            raise InputError(
                f"transductive model expects all {self.operator_.n_rows} nodes, got {X.shape[0]}"
            )
        if X.shape[1] != self.n_features_in_:
            raise InputError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return forward(self.params_, self.spec_, self.operator_, maybe_sparse(X))[0]

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]

    def score(self, X, y, sample_weight=None, idx=None) -> float:
        """Accuracy, optionally restricted to the node indices ``idx``."""
        pred = self.predict(X)
        y = np.asarray(y)
        if idx is not None:
            idx = check_index(idx, len(y), "idx")
            pred, y = pred[idx], y[idx]
        return float(np.mean(pred == y))
