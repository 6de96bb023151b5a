"""Matrix-free Hessian probing of block-structured losses.

The Hessian is never formed. Products come from central differences of the
gradient, and dominant eigenvalues of the diagonal blocks come from power
iteration on the block-restricted operator. Probing always uses the
deterministic (eval-mode) loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .exceptions import DomainError, InputError, NumericError
from .model import BlockParams

Block = Literal["theta", "w", "full"]


@dataclass(frozen=True)
class BlockSpec:
    """Coordinates of one block in the flat layout ``[theta; W]``."""

    block: Block
    d_theta: int
    d_w: int

    def __post_init__(self):
        if self.block not in ("theta", "w", "full"):
            raise InputError(f"unknown block {self.block!r}")

    @classmethod
    def of(cls, block: Block, p: BlockParams) -> "BlockSpec":
        return cls(block, p.d_theta, p.d_w)

    @property
    def dim(self) -> int:
        return self.d_theta + self.d_w

    @property
    def indices(self) -> slice:
        if self.block == "theta":
            return slice(0, self.d_theta)
        if self.block == "w":
            return slice(self.d_theta, self.dim)
        return slice(0, self.dim)

    def restrict(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros_like(v)
        sl = self.indices
        out[sl] = v[sl]
        return out


@dataclass
class SpectrumReport:
    lambda_theta: float
    lambda_w: float
    lambda_full: float | None
    iterations: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    converged: dict = field(default_factory=dict)
    kappa: float | None = None
    vectors: tuple | None = None

    @property
    def kappa_block(self) -> float:
        return block_condition_number(self.lambda_theta, self.lambda_w)


def hvp(loss_and_grad, p: BlockParams, v: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Hessian-vector product by central differences of the gradient.

    The step along ``v / ||v||`` is ``eps * (1 + ||p||)``; the result is
    rescaled by ``||v||``, so the map is linear in ``v``.
    """
    v = np.asarray(v, dtype=np.float64)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        raise InputError("hvp direction must be nonzero")
    base = p.flat()
    h = eps * (1.0 + float(np.linalg.norm(base)))
    u = v / nv
    _, gp = loss_and_grad(p.unflatten(base + h * u))
    _, gm = loss_and_grad(p.unflatten(base - h * u))
    out = (gp.flat() - gm.flat()) / (2.0 * h) * nv
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite Hessian-vector product")
    return out


@dataclass
class PowerResult:
    value: float
    vector: np.ndarray
    residual: float
    iterations: int
    converged: bool


def power_iteration(
    matvec: Callable[[np.ndarray], np.ndarray],
    spec: BlockSpec,
    tol: float = 1e-6,
    max_iter: int = 1000,
    seed=0,
    v0: np.ndarray | None = None,
) -> PowerResult:
    """Dominant eigenpair of the block submatrix ``P H P``.

    Converges to the eigenvalue of largest magnitude; the returned value
    carries its sign (from the Rayleigh quotient). Stops once the relative
    residual ``||Hv - lambda v|| / |lambda|`` drops below ``tol``.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    if v0 is None:
        v = np.random.default_rng(seed).standard_normal(spec.dim)
    else:
        v = np.asarray(v0, dtype=np.float64).copy()
    v = spec.restrict(v)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise InputError("starting vector vanishes on the block")
    v /= nv
    lam, res = 0.0, math.inf
    for it in range(1, max_iter + 1):
        w = spec.restrict(matvec(v))
        lam = float(v @ w)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return PowerResult(0.0, v, 0.0, it, True)
        res = float(np.linalg.norm(w - lam * v)) / max(abs(lam), 1e-300)
        if res <= tol:
            return PowerResult(lam, v, res, it, True)
        v = w / nw
    return PowerResult(lam, v, res, max_iter, False)


def block_lambda_max(matvec, spec: BlockSpec, tol=1e-6, max_iter=1000, seed=0, v0=None) -> tuple[float, float]:
    """``(lambda, residual)`` of the dominant eigenvalue of one block."""
    r = power_iteration(matvec, spec, tol=tol, max_iter=max_iter, seed=seed, v0=v0)
    return r.value, r.residual


def block_condition_number(lambda_theta: float, lambda_w: float) -> float:
    """``max / min`` of the two diagonal-block maximum eigenvalues."""
    if not (lambda_theta > 0 and lambda_w > 0):
        raise DomainError(
            f"block condition number needs positive eigenvalues, got {lambda_theta:.4g}, {lambda_w:.4g}"
        )
    return max(lambda_theta, lambda_w) / min(lambda_theta, lambda_w)


def safe_block_condition(lambda_theta, lambda_w) -> float:
    try:
        return block_condition_number(lambda_theta, lambda_w)
    except DomainError:
        return math.nan


class HessianProbe:
    """Finite-difference Hessian of ``loss_and_grad`` at a fixed point."""

    def __init__(self, loss_and_grad, params: BlockParams, eps: float = 1e-5):
        self.loss_and_grad = loss_and_grad
        self.params = params
        self.eps = eps
        self.n_hvp = 0

    def matvec(self, v: np.ndarray) -> np.ndarray:
        self.n_hvp += 1
        return hvp(self.loss_and_grad, self.params, v, self.eps)

    def block(self, block: Block, tol=1e-3, max_iter=100, seed=0, v0=None) -> PowerResult:
        return power_iteration(self.matvec, BlockSpec.of(block, self.params), tol, max_iter, seed, v0)

    def spectrum(self, tol=1e-3, max_iter=100, seed=0, full=True, v0=None) -> SpectrumReport:
        """Block maxima, and the full maximum started from the larger block's eigenvector.

        Starting the full iteration there means its Rayleigh quotient begins at
        the larger block value, so the estimate respects interlacing whenever
        the Hessian is positive semi-definite near the probe point.
        """
        v0t = v0w = None
        if v0 is not None:
            v0t, v0w = v0
        rt = self.block("theta", tol, max_iter, seed, v0t)
        rw = self.block("w", tol, max_iter, seed + 1, v0w)
        report = SpectrumReport(
            rt.value, rw.value, None,
            iterations={"theta": rt.iterations, "w": rw.iterations},
            residuals={"theta": rt.residual, "w": rw.residual},
            converged={"theta": rt.converged, "w": rw.converged},
        )
        report.vectors = (rt.vector, rw.vector)
        if full:
            start = rt.vector if rt.value >= rw.value else rw.vector
            rf = self.block("full", tol, max_iter, seed + 2, start)
            report.lambda_full = rf.value
            report.iterations["full"] = rf.iterations
            report.residuals["full"] = rf.residual
            report.converged["full"] = rf.converged
        return report


def lambda_min_shifted(matvec, spec: BlockSpec, lambda_max: float, tol=1e-6, max_iter=1000, seed=0) -> float:
    """Smallest eigenvalue via power iteration on ``lambda_max I - H``."""
    r = power_iteration(lambda v: lambda_max * v - matvec(v), spec, tol, max_iter, seed)
    return lambda_max - r.value


def condition_number(matvec, spec: BlockSpec, tol=1e-8, max_iter=5000, seed=0) -> float:
    """``|lambda_max| / |lambda_min|``; infinite for a singular operator."""
    lmax = power_iteration(matvec, spec, tol, max_iter, seed).value
    lmin = lambda_min_shifted(matvec, spec, lmax, tol, max_iter, seed + 1)
    if abs(lmin) <= 1e-14 * abs(lmax):
        return math.inf
    return abs(lmax) / abs(lmin)


def relative_perturbation(p: BlockParams, scale: float, rng: np.random.Generator) -> BlockParams:
    """``p + noise`` with Gaussian direction and ``||noise|| = scale * ||p||``."""
    base = p.flat()
    z = rng.standard_normal(base.size)
    nz = np.linalg.norm(z)
    step = scale * np.linalg.norm(base) * z / nz if nz > 0 else z
    return p.unflatten(base + step)


@dataclass
class AuditReport:
    points: list[dict]
    rho_le_lambda: list[bool]
    covary: bool
    mild_scaling: list[dict]
    ordering: dict
    violations: list[str]

    def as_dict(self) -> dict:
        return {
            "points": self.points,
            "rho_le_lambda": self.rho_le_lambda,
            "covary": self.covary,
            "mild_scaling": self.mild_scaling,
            "ordering": self.ordering,
            "violations": self.violations,
        }


def assumption_audit(
    trained,
    loss_and_grad,
    noise_scale: float = 0.1,
    seed: int = 0,
    eps: float = 1e-5,
    tol: float = 1e-3,
    max_iter: int = 100,
) -> AuditReport:
    """Empirical check of the assumptions behind the block-conditioning theorem.

    ``trained`` is a :class:`~asymspec.optim.TrainResult`. Noise is relative:
    each perturbed point sits at distance ``noise_scale * ||psi_best||``.
    Violations are reported, never raised.
    """
    best = trained.best_params
    rng = np.random.default_rng(seed)
    violations: list[str] = []

    points = []
    for i in range(2):
        psi = relative_perturbation(best, noise_scale, rng)
        _, g = loss_and_grad(psi)
        rho = float(np.linalg.norm(g.flat()) / np.linalg.norm(psi.flat()))
        lam = HessianProbe(loss_and_grad, psi, eps).block("full", tol, max_iter, seed=seed).value
        dist = float(np.linalg.norm(psi.flat() - best.flat()))
        points.append({"rho": rho, "lambda_max": lam, "proximity": dist <= float(np.linalg.norm(psi.flat()))})
    rho_le = [pt["rho"] <= pt["lambda_max"] for pt in points]
    for i, ok in enumerate(rho_le):
        if not ok:
            violations.append(f"point {i + 1}: rho {points[i]['rho']:.4g} > lambda_max {points[i]['lambda_max']:.4g}")
    p1, p2 = points
    covary = (p1["rho"] >= p2["rho"]) == (p1["lambda_max"] >= p2["lambda_max"])
    if not covary:
        violations.append("GPNR ordering does not follow lambda_max ordering between the perturbed points")

    mild = []
    for rec in trained.records:
        if rec.lambda_theta is None or rec.lambda_w is None or rec.lambda_theta == 0:
            continue
        lhs = rec.s_theta / rec.s_w
        rhs = rec.lambda_w / rec.lambda_theta
        mild.append({"iteration": rec.iteration, "s_ratio": lhs, "lambda_ratio": rhs, "holds": bool(lhs >= rhs)})
    n_bad = sum(not m["holds"] for m in mild)
    if n_bad:
        violations.append(f"mild scaling fails at {n_bad} of {len(mild)} logged iterations")

    spec = HessianProbe(loss_and_grad, best, eps).spectrum(tol, max_iter, seed=seed)
    ordering = {
        "lambda_full": spec.lambda_full,
        "lambda_theta": spec.lambda_theta,
        "lambda_w": spec.lambda_w,
        "holds": bool(spec.lambda_full >= spec.lambda_theta >= spec.lambda_w),
    }
    if not ordering["holds"]:
        violations.append("lambda_max(H) >= lambda_max(H_theta) >= lambda_max(H_w) does not hold")
    return AuditReport(points, rho_le, covary, mild, ordering, violations)


class BlockSpectrumSampler:
    """Training hook recording block maxima and ``kappa'`` every few iterations.

    Successive probes are warm-started from the previous block eigenvectors,
    which keeps the cost per sample to a handful of HVPs once training settles.
    """

    def __init__(self, loss_and_grad, eps: float = 1e-5, tol: float = 1e-3, max_iter: int = 50, seed: int = 0):
        self.loss_and_grad = loss_and_grad
        self.eps = eps
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed
        self._vectors = None

    def __call__(self, t: int, params: BlockParams) -> dict:
        probe = HessianProbe(self.loss_and_grad, params, self.eps)
        try:
            rep = probe.spectrum(self.tol, self.max_iter, seed=self.seed, full=False, v0=self._vectors)
        except (NumericError, InputError):
            self._vectors = None
            return {}
        self._vectors = rep.vectors
        return {
            "lambda_theta": rep.lambda_theta,
            "lambda_w": rep.lambda_w,
            "kappa_block": safe_block_condition(rep.lambda_theta, rep.lambda_w),
        }
