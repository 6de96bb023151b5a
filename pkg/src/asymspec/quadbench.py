"""Two-block quadratic testbed with explicit Hessians.

``L(psi) = 1/2 (psi - psi*)^T H (psi - psi*)`` with ``psi = [theta; w]``.
Gradients are exact, so the block-conditioning claims can be checked without
any finite-difference error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import ClassVar

import numpy as np

from .exceptions import InputError
from .model import BlockParams


@dataclass
class QuadParams(BlockParams):
    w: np.ndarray = None
    w_fields: ClassVar[tuple[str, ...]] = ("w",)

    @classmethod
    def from_flat(cls, vec: np.ndarray, d_theta: int) -> "QuadParams":
        vec = np.asarray(vec, dtype=np.float64)
        return cls(theta=vec[:d_theta].copy(), w=vec[d_theta:].copy())


def _random_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _prescribed_block(rng, d: int, lam_max: float) -> np.ndarray:
    spec = rng.uniform(0.0, lam_max, size=d)
    spec[0] = lam_max
    if d == 1:
        return np.array([[lam_max]])
    q = _random_orthogonal(rng, d)
    b = (q * spec) @ q.T
    return 0.5 * (b + b.T)


@dataclass
class QuadraticProblem:
    d_theta: int
    d_w: int
    H: np.ndarray
    psi_star: np.ndarray
    lambda_theta: float  # achieved block maxima
    lambda_w: float
    projected: bool = False

    @property
    def dim(self) -> int:
        return self.d_theta + self.d_w

    @property
    def kappa_block(self) -> float:
        return max(self.lambda_theta, self.lambda_w) / min(self.lambda_theta, self.lambda_w)

    @property
    def lambda_max(self) -> float:
        return float(np.linalg.eigvalsh(self.H)[-1])

    def loss(self, psi: np.ndarray) -> float:
        e = psi - self.psi_star
        return 0.5 * float(e @ self.H @ e)

    def grad(self, psi: np.ndarray) -> np.ndarray:
        return self.H @ (psi - self.psi_star)

    def params(self, psi: np.ndarray) -> QuadParams:
        return QuadParams.from_flat(psi, self.d_theta)

    def objective(self) -> "QuadObjective":
        return QuadObjective(self)


@dataclass
class QuadObjective:
    """Adapter exposing a quadratic through the training/probing interface."""

    problem: QuadraticProblem

    def loss_and_grad(self, p: QuadParams):
        psi = p.flat()
        return self.problem.loss(psi), p.unflatten(self.problem.grad(psi))

    def train_loss_and_grad(self, p: QuadParams, seed=None):
        return self.loss_and_grad(p)

    def val_loss(self, p: QuadParams) -> float:
        return self.problem.loss(p.flat())


def synth_quadratic(
    d_theta: int,
    d_w: int,
    lambda_theta: float,
    lambda_w: float,
    cross_coupling: float = 0.0,
    seed=0,
    psi_star: np.ndarray | None = None,
) -> QuadraticProblem:
    """PSD two-block quadratic with prescribed diagonal-block maxima.

    Off-diagonal coupling has spectral norm ``cross_coupling * sqrt(lt * lw)``.
    If the assembled matrix is indefinite its negative eigenvalues are floored
    at zero, which moves the block maxima; the achieved values are reported.
    """
    if lambda_theta <= 0 or lambda_w <= 0:
        raise InputError("target block eigenvalues must be positive")
    if not 0.0 <= cross_coupling < 1.0:
        raise InputError("cross_coupling must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    d = d_theta + d_w
    H = np.zeros((d, d))
    H[:d_theta, :d_theta] = _prescribed_block(rng, d_theta, lambda_theta)
    H[d_theta:, d_theta:] = _prescribed_block(rng, d_w, lambda_w)
    if cross_coupling > 0:
        c = rng.standard_normal((d_theta, d_w))
        c *= cross_coupling * math.sqrt(lambda_theta * lambda_w) / np.linalg.norm(c, 2)
        H[:d_theta, d_theta:] = c
        H[d_theta:, :d_theta] = c.T
    projected = False
    evals, evecs = np.linalg.eigh(H)
    if evals[0] < 0:
        H = (evecs * np.maximum(evals, 0.0)) @ evecs.T
        H = 0.5 * (H + H.T)
        projected = True
    lt = float(np.linalg.eigvalsh(H[:d_theta, :d_theta])[-1])
    lw = float(np.linalg.eigvalsh(H[d_theta:, d_theta:])[-1])
    if psi_star is None:
        psi_star = rng.standard_normal(d)
    return QuadraticProblem(d_theta, d_w, H, np.asarray(psi_star, dtype=np.float64), lt, lw, projected)


@dataclass
class TrialIteration:
    iteration: int
    rho_theta: float
    rho_w: float
    s_theta: float
    s_w: float
    kappa: float  # block condition number before scaling
    kappa_pre: float  # after scaling
    mild_scaling: bool
    proportional_gpnr: bool
    theorem_holds: bool  # exact rational comparison
    identity_error: float | None  # |k' - (s_t/s_w) k| / k' when theta stays dominant


@dataclass
class TheoremTrial:
    iterations: list[TrialIteration] = field(default_factory=list)
    diverged: bool = False

    @property
    def hypotheses_met(self) -> list[TrialIteration]:
        return [it for it in self.iterations if it.mild_scaling and it.proportional_gpnr]


def _exact_kappa(a: Fraction, b: Fraction) -> Fraction:
    return max(a, b) / min(a, b)


def theorem_trial(
    q: QuadraticProblem,
    start: np.ndarray,
    eta: float,
    n_iter: int = 50,
    force_equal_scales: bool = False,
    blowup: float = 1e12,
) -> TheoremTrial:
    """Asymmetric gradient descent (no smoothing) with per-iteration checks.

    At each iterate, with ``s = ||psi_block|| / ||grad_block||``:

    * ``kappa`` is the block condition number of ``H``; ``kappa_pre`` that of
      ``R H``, whose diagonal blocks are ``s_theta H_tt`` and ``s_w H_ww``.
    * Hypotheses are stated for the dominant block ``d`` (larger block
      maximum) against the other block ``o``: mild scaling
      ``s_d / s_o >= lambda_o / lambda_d`` and proportional GPNR
      ``rho_d >= rho_o``. With theta dominant these are the stated forms.
    * ``theorem_holds`` compares the two block condition numbers in exact
      rational arithmetic on the measured norms.

    The GPNR hypothesis pairs the two blocks at one iterate; pairing two
    iterates would be vacuous here because the curvature is constant.
    """
    psi = np.asarray(start, dtype=np.float64).copy()
    if np.array_equal(psi, q.psi_star):
        raise InputError("start must differ from the minimizer")
    dt = q.d_theta
    lt, lw = q.lambda_theta, q.lambda_w
    Flt, Flw = Fraction(lt), Fraction(lw)
    kappa_exact = _exact_kappa(Flt, Flw)
    theta_dominant = lt >= lw
    trial = TheoremTrial()
    for t in range(n_iter):
        g = q.grad(psi)
        nt, nw = float(np.linalg.norm(psi[:dt])), float(np.linalg.norm(psi[dt:]))
        gt, gw = float(np.linalg.norm(g[:dt])), float(np.linalg.norm(g[dt:]))
        if min(nt, nw, gt, gw) == 0.0:
            break
        rho_t, rho_w = gt / nt, gw / nw
        if force_equal_scales:
            s_t = s_w = 1.0
            Fs_t = Fs_w = Fraction(1)
        else:
            s_t, s_w = nt / gt, nw / gw
            Fs_t, Fs_w = Fraction(nt) / Fraction(gt), Fraction(nw) / Fraction(gw)
        Frho_t, Frho_w = Fraction(gt) / Fraction(nt), Fraction(gw) / Fraction(nw)
        if theta_dominant:
            mild = Fs_t / Fs_w >= Flw / Flt
            prop = Frho_t >= Frho_w
        else:
            mild = Fs_w / Fs_t >= Flt / Flw
            prop = Frho_w >= Frho_t
        kappa_pre_exact = _exact_kappa(Fs_t * Flt, Fs_w * Flw)
        holds = kappa_pre_exact <= kappa_exact
        kappa = max(lt, lw) / min(lt, lw)
        kappa_pre = max(s_t * lt, s_w * lw) / min(s_t * lt, s_w * lw)
        ident = None
        if theta_dominant and s_t * lt >= s_w * lw:
            ident = abs(kappa_pre - (s_t / s_w) * kappa) / kappa_pre
        trial.iterations.append(
            TrialIteration(t, rho_t, rho_w, s_t, s_w, kappa, kappa_pre, mild, prop, holds, ident)
        )
        psi = np.concatenate([psi[:dt] - eta * s_t * g[:dt], psi[dt:] - eta * s_w * g[dt:]])
        if not np.all(np.isfinite(psi)) or np.linalg.norm(psi) > blowup:
            trial.diverged = True
            break
    return trial


def random_theorem_trials(
    n_trials: int,
    seed=0,
    n_iter: int = 30,
    max_dim: int = 12,
) -> list[TheoremTrial]:
    """Trials over random dimensions, spectra, couplings and starting points."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_trials):
        d_t = int(rng.integers(1, max_dim + 1))
        d_w = int(rng.integers(1, 3 * max_dim + 1))
        lt, lw = 10.0 ** rng.uniform(-2, 2, size=2)
        q = synth_quadratic(d_t, d_w, lt, lw, float(rng.uniform(0, 0.9)), seed=int(rng.integers(2**31)))
        start = q.psi_star + rng.uniform(0.05, 2.0) * rng.standard_normal(q.dim)
        eta = float(10.0 ** rng.uniform(-3, -0.5))
        out.append(theorem_trial(q, start, eta, n_iter=n_iter))
    return out


@dataclass
class BoundReport:
    n_points: int
    n_valid: int
    n_excluded: int
    n_satisfied: int
    lambda_max: float
    max_ratio: float  # max rho / lambda_max among valid points

    @property
    def fraction(self) -> float:
        return self.n_satisfied / self.n_valid if self.n_valid else math.nan


def gpnr_at(q: QuadraticProblem, psi: np.ndarray) -> float:
    return float(np.linalg.norm(q.grad(psi)) / np.linalg.norm(psi))


def gpnr_bound_trial(q: QuadraticProblem, noise_scale: float, n_points: int, seed=0) -> BoundReport:
    """Sample points around the minimizer and test ``rho <= lambda_max(H)``.

    Offsets are Gaussian with expected norm ``noise_scale``. Points violating
    ``||psi - psi*|| <= ||psi||`` are excluded and counted.
    """
    rng = np.random.default_rng(seed)
    lam = q.lambda_max
    eps = noise_scale * rng.standard_normal((n_points, q.dim)) / math.sqrt(q.dim)
    psi = q.psi_star + eps
    valid = np.linalg.norm(eps, axis=1) <= np.linalg.norm(psi, axis=1)
    g = eps @ q.H  # H symmetric
    rho = np.linalg.norm(g, axis=1) / np.linalg.norm(psi, axis=1)
    ok = rho[valid] <= lam
    return BoundReport(
        n_points=n_points,
        n_valid=int(valid.sum()),
        n_excluded=int((~valid).sum()),
        n_satisfied=int(ok.sum()),
        lambda_max=lam,
        max_ratio=float((rho[valid] / lam).max()) if valid.any() else math.nan,
    )
