"""Gradient descent, Adam, and the asymmetric gradient preconditioner.

Per iteration the training loop

1. computes the raw gradient,
2. probes the optimizer for the update direction ``delta`` this gradient
   would produce, without advancing its state,
3. updates the moving-average parameter norms ``pi``,
4. sets the block scales ``s = pi / ||delta||``,
5. evaluates the validation loss,
6. checkpoints when it is ``<=`` the best so far,
7. scales the raw gradient block-wise,
8. runs the optimizer on the scaled gradient, advancing its state, and
9. applies the update.

With preconditioning off, steps 2-4 and 7 are skipped and the loop is plain
optimizer training. The final update is never evaluated on validation data.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .exceptions import ConfigError, NumericError
from .model import BlockParams

logger = logging.getLogger(__name__)

EPS_SCALE = 1e-12


def gpnr(grad_block_norm: float, param_block_norm: float) -> float:
    """Gradient-parameter norm ratio with a sentinel for zero parameters."""
    if param_block_norm == 0.0:
        return 0.0 if grad_block_norm == 0.0 else math.inf
    return grad_block_norm / param_block_norm


def ema_norm_update(pi_prev: float, beta: float, current_norm: float) -> float:
    if not 0.0 <= beta <= 1.0:
        raise ConfigError(f"smoothing factor must lie in [0, 1], got {beta}")
    return beta * pi_prev + (1.0 - beta) * current_norm


def asym_scales(
    pi_theta: float, pi_w: float, delta_theta_norm: float, delta_w_norm: float, eps: float = EPS_SCALE
) -> tuple[float, float]:
    """``s = |pi| / ||delta||`` per block.

    ``eps`` floors the denominator instead of being added to it, so the
    scales are exact whenever the update is nonzero.
    """
    return abs(pi_theta) / max(delta_theta_norm, eps), abs(pi_w) / max(delta_w_norm, eps)


def precondition(s_theta: float, s_w: float, g: BlockParams) -> BlockParams:
    return g.scale_blocks(s_theta, s_w)


@dataclass
class OptimizerState:
    kind: Literal["gd", "adam"] = "adam"
    lr_theta: float = 0.01
    lr_w: float = 0.01
    weight_decay_theta: float = 0.0
    weight_decay_w: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: BlockParams | None = None
    v: BlockParams | None = None

    def __post_init__(self):
        if self.kind not in ("gd", "adam"):
            raise ConfigError(f"unknown optimizer {self.kind!r}")

    def clone(self) -> "OptimizerState":
        return copy.deepcopy(self)


def _moments(st: OptimizerState, g: BlockParams):
    b1, b2 = st.beta1, st.beta2
    if st.m is None:
        m = g.map(lambda gg: (1.0 - b1) * gg)
        v = g.map(lambda gg: (1.0 - b2) * (gg * gg))
    else:
        m = st.m.map(lambda m, gg: b1 * m + (1.0 - b1) * gg, g)
        v = st.v.map(lambda v, gg: b2 * v + (1.0 - b2) * (gg * gg), g)
    return m, v


def _adam_delta(st: OptimizerState, m: BlockParams, v: BlockParams, step: int) -> BlockParams:
    bc1 = 1.0 - st.beta1**step
    bc2 = 1.0 - st.beta2**step
    return m.map(lambda mm, vv: (mm / bc1) / (np.sqrt(vv / bc2) + st.eps), v)


def update_direction(st: OptimizerState, g: BlockParams) -> BlockParams:
    """The ``delta`` that :func:`optimizer_step` would produce, without touching ``st``."""
    if st.kind == "gd":
        return g
    m, v = _moments(st, g)
    return _adam_delta(st, m, v, st.step + 1)


def optimizer_step(st: OptimizerState, p: BlockParams, g: BlockParams) -> tuple[BlockParams, BlockParams]:
    """Advance ``st`` by one step; returns ``(new_params, delta)``.

    ``delta`` is the update direction before the learning rate: the gradient
    itself for GD, ``m_hat / (sqrt(v_hat) + eps)`` for Adam. Weight decay is
    decoupled: ``p <- p - lr * (delta + wd * p)``.
    """
    st.step += 1
    if st.kind == "gd":
        delta = g
    else:
        st.m, st.v = _moments(st, g)
        delta = _adam_delta(st, st.m, st.v, st.step)

    kw = {}
    for name in p.names():
        lr, wd = (st.lr_theta, st.weight_decay_theta) if name == "theta" else (st.lr_w, st.weight_decay_w)
        pa, da = getattr(p, name), getattr(delta, name)
        kw[name] = pa - lr * (da + wd * pa) if wd else pa - lr * da
    new = type(p)(**kw)
    if not new.all_finite():
        raise NumericError(f"non-finite parameters after optimizer step {st.step}")
    return new, delta


@dataclass
class PreconditionerState:
    pi_theta: float
    pi_w: float
    beta_theta: float = 0.9
    beta_w: float = 0.9
    s_theta: float = 1.0
    s_w: float = 1.0
    eps: float = EPS_SCALE

    def __post_init__(self):
        for b in (self.beta_theta, self.beta_w):
            if not 0.0 <= b <= 1.0:
                raise ConfigError(f"smoothing factor must lie in [0, 1], got {b}")

    def update(self, p: BlockParams, delta: BlockParams, clamp=None) -> tuple[float, float]:
        self.pi_theta = ema_norm_update(self.pi_theta, self.beta_theta, p.theta_norm())
        self.pi_w = ema_norm_update(self.pi_w, self.beta_w, p.w_norm())
        s_t, s_w = asym_scales(self.pi_theta, self.pi_w, delta.theta_norm(), delta.w_norm(), self.eps)
        if clamp is not None:
            lo, hi = clamp
            s_t, s_w = min(max(s_t, lo), hi), min(max(s_w, lo), hi)
        self.s_theta, self.s_w = s_t, s_w
        return s_t, s_w


@dataclass
class DiagnosticsRecord:
    iteration: int
    train_loss: float
    val_loss: float
    rho_theta: float  # raw GPNR
    rho_w: float
    rho_theta_pre: float  # GPNR of the preconditioned gradient
    rho_w_pre: float
    s_theta: float
    s_w: float
    pi_theta: float
    pi_w: float
    lambda_theta: float | None = None
    lambda_w: float | None = None
    kappa_block: float | None = None


@dataclass
class TrainResult:
    best_params: BlockParams
    best_val_loss: float
    best_iteration: int
    records: list[DiagnosticsRecord] = field(default_factory=list)
    final_params: BlockParams | None = None
    diverged: bool = False
    stopped_early: bool = False
    message: str = ""


@dataclass
class TrainConfig:
    optimizer: Literal["gd", "adam"] = "adam"
    lr_theta: float = 0.01
    lr_w: float = 0.01
    weight_decay_theta: float = 0.0
    weight_decay_w: float = 0.0
    beta_theta: float = 0.9
    beta_w: float = 0.9
    t_max: int = 1000
    patience: int | None = 200
    scale_clamp: tuple[float, float] | None = None
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8

    def make_optimizer(self) -> OptimizerState:
        return OptimizerState(
            kind=self.optimizer,
            lr_theta=self.lr_theta,
            lr_w=self.lr_w,
            weight_decay_theta=self.weight_decay_theta,
            weight_decay_w=self.weight_decay_w,
            beta1=self.adam_betas[0],
            beta2=self.adam_betas[1],
            eps=self.adam_eps,
        )


def asymmetric_train(
    objective,
    params0: BlockParams,
    cfg: TrainConfig,
    precondition_on: bool = True,
    *,
    seed: int = 0,
    hook: Callable[[int, BlockParams], dict] | None = None,
    hook_every: int = 0,
) -> TrainResult:
    """Train ``params0`` on ``objective`` with optional asymmetric preconditioning.

    ``objective`` needs ``train_loss_and_grad(params, seed)`` and
    ``val_loss(params)``. ``hook(t, params)`` is called every ``hook_every``
    iterations and may return ``lambda_theta``/``lambda_w``/``kappa_block``
    entries for the diagnostics record. Runs ``t = 0..t_max`` inclusive.
    """
    if cfg.t_max < 1:
        raise ConfigError("t_max must be >= 1")
    opt = cfg.make_optimizer()
    params = params0.copy()
    pre = PreconditionerState(
        pi_theta=params.theta_norm(), pi_w=params.w_norm(),
        beta_theta=cfg.beta_theta, beta_w=cfg.beta_w,
    )
    best_val, best_params, best_it = math.inf, params.copy(), -1
    records: list[DiagnosticsRecord] = []
    since_best = 0
    result = TrainResult(best_params, best_val, best_it, records)

    for t in range(cfg.t_max + 1):
        try:
            loss, g = objective.train_loss_and_grad(params, seed=(seed, t))
            if not (math.isfinite(loss) and g.all_finite()):
                raise NumericError(f"non-finite loss or gradient at iteration {t}")
            th_norm, w_norm = params.theta_norm(), params.w_norm()
            if precondition_on:
                delta = update_direction(opt, g)
                s_t, s_w = pre.update(params, delta, cfg.scale_clamp)
            else:
                s_t = s_w = 1.0
            val = objective.val_loss(params)
            if not math.isfinite(val):
                raise NumericError(f"non-finite validation loss at iteration {t}")
            if val <= best_val:
                best_val, best_params, best_it = val, params.copy(), t
                since_best = 0
            else:
                since_best += 1
            g_bar = precondition(s_t, s_w, g) if precondition_on else g
            rec = DiagnosticsRecord(
                iteration=t,
                train_loss=loss,
                val_loss=val,
                rho_theta=gpnr(g.theta_norm(), th_norm),
                rho_w=gpnr(g.w_norm(), w_norm),
                rho_theta_pre=gpnr(g_bar.theta_norm(), th_norm),
                rho_w_pre=gpnr(g_bar.w_norm(), w_norm),
                s_theta=s_t,
                s_w=s_w,
                pi_theta=pre.pi_theta,
                pi_w=pre.pi_w,
            )
            if hook is not None and hook_every > 0 and t % hook_every == 0:
                for k, v in hook(t, params).items():
                    setattr(rec, k, v)
            records.append(rec)
            params, _ = optimizer_step(opt, params, g_bar)
        except NumericError as exc:
            logger.warning("training diverged: %s", exc)
            result.diverged = True
            result.message = str(exc)
            break
        if cfg.patience is not None and since_best >= cfg.patience:
            result.stopped_early = True
            break

    result.best_params = best_params
    result.best_val_loss = best_val
    result.best_iteration = best_it
    result.final_params = params
    return result
