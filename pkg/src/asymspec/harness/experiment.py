"""Paired S (plain optimizer) vs AS (asymmetric preconditioning) experiments."""

from __future__ import annotations

import dataclasses
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..basis import FAMILIES, FilterSpec
from ..exceptions import ConfigError
from ..graphcore import check_chebyshev_domain, graph_matrix
from ..hessian import BlockSpectrumSampler
from ..model import GNNObjective, ModelParams, accuracy, init_params
from ..optim import DiagnosticsRecord, TrainConfig, asymmetric_train
from ..validation import maybe_sparse
from .datasets import DatasetBundle
from .splits import FractionalPolicy, PerClassPolicy, SplitMasks, make_splits, policy_from_dict

logger = logging.getLogger(__name__)

ARMS = ("S", "AS")

# hyperparameter search ranges for --grid
SEARCH_GRID = {
    "input_dropout": [0.5, 0.7, 0.8, 0.9],
    "hidden_dropout": [0.5, 0.7, 0.8, 0.9],
    "lr_theta": [0.001, 0.01, 0.05],
    "weight_decay_theta": [0.0, 0.0001, 0.0005],
    "weight_decay_w": [0.0, 0.0001, 0.0005],
    "lr_w": [0.005, 0.01, 0.05],
    "beta_theta": [0.9, 0.99],
    "beta_w": [0.9, 0.99],
}
SEARCH_GRID_JACOBI = {
    "jacobi_a": [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0],
    "jacobi_b": [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0],
    "init_alpha": [0.1, 0.5, 0.9, 1.0, 2.0],
}
SEARCH_GRID_MONOMIAL = {"init_alpha": [0.1, 0.5, 0.9, 1.0, 2.0]}


@dataclass
class ExperimentConfig:
    model: str = "chebyshev"
    K: int = 10
    hidden: int = 64
    optimizer: str = "adam"
    lr_theta: float = 0.01
    lr_w: float = 0.01
    weight_decay_theta: float = 0.0005
    weight_decay_w: float = 0.0005
    input_dropout: float = 0.5
    hidden_dropout: float = 0.5
    beta_theta: float = 0.9
    beta_w: float = 0.9
    t_max: int = 1000
    patience: int | None = 200
    seeds: list = field(default_factory=lambda: list(range(10)))
    split: dict = field(default_factory=lambda: {"kind": "fractional", "p_train": 0.025, "p_val": 0.025})
    diagnostics_every: int = 10
    jacobi_a: float = 1.0
    jacobi_b: float = 1.0
    init_alpha: float | None = None
    scale_clamp: list | None = None
    arms: tuple = ARMS
    probe_tol: float = 1e-3
    probe_max_iter: int = 50
    hvp_eps: float = 1e-5

    def __post_init__(self):
        if self.model not in FAMILIES:
            raise ConfigError(f"unknown model family {self.model!r}; choose from {FAMILIES}")
        if self.optimizer not in ("gd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        for name in ("input_dropout", "hidden_dropout"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {v}")
        for name in ("beta_theta", "beta_w"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.t_max < 1:
            raise ConfigError("t_max must be >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        self.arms = tuple(self.arms)
        if not self.arms or any(a not in ARMS for a in self.arms):
            raise ConfigError(f"arms must be a non-empty subset of {ARMS}")
        self.split_policy()
        self.filter_spec()

    def filter_spec(self) -> FilterSpec:
        try:
            return FilterSpec(self.model, self.K, self.jacobi_a, self.jacobi_b)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def split_policy(self):
        return policy_from_dict(self.split)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            optimizer=self.optimizer,
            lr_theta=self.lr_theta,
            lr_w=self.lr_w,
            weight_decay_theta=self.weight_decay_theta,
            weight_decay_w=self.weight_decay_w,
            beta_theta=self.beta_theta,
            beta_w=self.beta_w,
            t_max=self.t_max,
            patience=self.patience,
            scale_clamp=tuple(self.scale_clamp) if self.scale_clamp else None,
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["arms"] = list(self.arms)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known - {"grid"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**{k: v for k, v in d.items() if k in known})
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path) -> tuple[ExperimentConfig, dict | None]:
    """Read a JSON config; an optional ``grid`` key lists values to enumerate."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return ExperimentConfig.from_dict(raw), raw.get("grid")


def search_grid(model: str) -> dict:
    grid = dict(SEARCH_GRID)
    if model == "jacobi":
        grid.update(SEARCH_GRID_JACOBI)
    elif model == "monomial":
        grid.update(SEARCH_GRID_MONOMIAL)
    return grid


def grid_configs(base: ExperimentConfig, grid: dict) -> list[ExperimentConfig]:
    """Every combination of ``grid`` values applied over ``base``.

    Jacobi combinations with ``a <= -1`` or ``b <= -1`` are skipped since the
    recursion is undefined there.
    """
    keys = sorted(grid)
    out = []
    for values in itertools.product(*(grid[k] for k in keys)):
        d = base.to_dict()
        d.update(dict(zip(keys, values)))
        if d["model"] == "jacobi" and (d["jacobi_a"] <= -1 or d["jacobi_b"] <= -1):
            continue
        out.append(ExperimentConfig.from_dict(d))
    return out


@dataclass
class SeedResult:
    seed: int
    arm: str
    test_acc: float | None  # percent
    best_val_loss: float
    best_iteration: int
    n_iterations: int
    diverged: bool
    message: str
    records: list[DiagnosticsRecord]
    params: ModelParams | None = None
    split: SplitMasks | None = None


@dataclass
class RunReport:
    arm: str
    seeds: list[SeedResult]
    wall_clock: float = 0.0

    @property
    def accuracies(self) -> list[float]:
        return [r.test_acc for r in self.seeds if r.test_acc is not None]

    @property
    def mean(self) -> float:
        a = self.accuracies
        return float(np.mean(a)) if a else math.nan

    @property
    def std(self) -> float:
        a = self.accuracies
        return float(np.std(a, ddof=1)) if len(a) > 1 else math.nan

    @property
    def n_diverged(self) -> int:
        return sum(r.diverged for r in self.seeds)

    def cell(self) -> str:
        return f"{self.mean:.2f}±{self.std:.2f}"


def prepare(cfg: ExperimentConfig, data: DatasetBundle):
    spec = cfg.filter_spec()
    m = graph_matrix(data.graph, spec.operator)
    if spec.family in ("chebyshev", "chebyshev_ii"):
        check_chebyshev_domain(m)
    return spec, m, maybe_sparse(data.graph.features)


def run_single(cfg: ExperimentConfig, data: DatasetBundle, seed: int, arm: str, prepared=None) -> SeedResult:
    """One seed of one arm. Splits, initial parameters and dropout draws
    depend only on ``seed``, so the two arms of a seed are paired exactly."""
    spec, m, x = prepared or prepare(cfg, data)
    g = data.graph
    split = make_splits(g.n_nodes, g.labels, cfg.split_policy(), seed)
    objective = GNNObjective(
        spec, m, x, g.labels, split.train, split.val, cfg.input_dropout, cfg.hidden_dropout
    )
    p0 = init_params(seed, g.n_features, cfg.hidden, g.n_classes, cfg.K, cfg.model, cfg.init_alpha)
    hook = None
    if cfg.diagnostics_every > 0:
        hook = BlockSpectrumSampler(
            objective.loss_and_grad, cfg.hvp_eps, cfg.probe_tol, cfg.probe_max_iter, seed=seed
        )
    res = asymmetric_train(
        objective, p0, cfg.train_config(), precondition_on=(arm == "AS"),
        seed=seed, hook=hook, hook_every=cfg.diagnostics_every,
    )
    acc = None
    if res.best_iteration >= 0:
        acc = 100.0 * accuracy(objective.logits(res.best_params), g.labels, split.test)
    if res.diverged:
        logger.warning("seed %d arm %s diverged: %s", seed, arm, res.message)
    return SeedResult(
        seed, arm, None if res.diverged else acc, res.best_val_loss, res.best_iteration,
        len(res.records), res.diverged, res.message, res.records, res.best_params, split,
    )


def _worker(args):
    cfg, data, seed, arm = args
    return run_single(cfg, data, seed, arm)


def n_workers() -> int:
    raw = os.environ.get("ASYMSPEC_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"ASYMSPEC_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


def run_experiment(cfg: ExperimentConfig, data: DatasetBundle) -> dict[str, RunReport]:
    """Train every configured arm on every seed; returns reports keyed by arm."""
    start = time.perf_counter()
    jobs = [(seed, arm) for seed in cfg.seeds for arm in cfg.arms]
    workers = min(n_workers(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_worker, [(cfg, data, s, a) for s, a in jobs]))
    else:
        prepared = prepare(cfg, data)
        results = [run_single(cfg, data, s, a, prepared) for s, a in jobs]
    elapsed = time.perf_counter() - start
    reports = {arm: RunReport(arm, [r for r in results if r.arm == arm], elapsed) for arm in cfg.arms}
    for rep in reports.values():
        if rep.n_diverged:
            logger.warning("arm %s: %d diverged seed(s) excluded from aggregation", rep.arm, rep.n_diverged)
    return reports


def delta(reports: dict[str, RunReport]) -> float:
    if "S" in reports and "AS" in reports:
        return reports["AS"].mean - reports["S"].mean
    return math.nan


__all__ = [
    "ARMS",
    "ExperimentConfig",
    "FractionalPolicy",
    "SEARCH_GRID",
    "PerClassPolicy",
    "RunReport",
    "SeedResult",
    "delta",
    "grid_configs",
    "load_config",
    "search_grid",
    "run_experiment",
    "run_single",
]
