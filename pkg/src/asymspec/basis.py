"""Polynomial graph filters applied through their recursions.

Every family is evaluated as ``sum_k theta_k * B_k`` where ``B_k = T_k(M) h``
is the k-th basis block. The blocks are kept so that the gradient with
respect to ``theta_k`` is a plain inner product with the upstream gradient.

Jacobi recursion sign: the three-term recursion is written with all terms
added, so the last coefficient carries the minus sign of the classical
recursion, ``gamma''_k = -(k+a-1)(k+b-1)(2k+a+b) / (k(k+a+b)(2k+a+b-2))``.
With ``a = b = 0`` this reproduces Legendre polynomials; the first-order term
is ``(a-b)/2 + (a+b+2)/2 x``.

ChebNetII coefficients use the interpolation sum without halving the k = 0
term, so a constant response ``theta = c * ones`` gives ``c_0 = 2c(K+1)/(K+2)``
rather than ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Literal

import numpy as np

from .exceptions import InputError, NumericError, ParameterError
from .graphcore import SparseMatrix, spmm

Family = Literal["chebyshev", "chebyshev_ii", "jacobi", "monomial", "bernstein"]
FAMILIES: tuple[str, ...] = ("chebyshev", "chebyshev_ii", "jacobi", "monomial", "bernstein")

# graph operator each family expects
FAMILY_OPERATOR = {
    "chebyshev": "shifted_norm_laplacian",
    "chebyshev_ii": "shifted_norm_laplacian",
    "jacobi": "norm_adjacency",
    "monomial": "norm_adjacency_selfloop",
    "bernstein": "norm_laplacian",
}


@dataclass(frozen=True)
class FilterSpec:
    family: Family
    order: int
    jacobi_a: float = 1.0
    jacobi_b: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown filter family {self.family!r}")
        if self.order < 0:
            raise ParameterError("filter order K must be >= 0")
        if self.family == "jacobi" and (self.jacobi_a <= -1 or self.jacobi_b <= -1):
            raise ParameterError("Jacobi parameters must satisfy a, b > -1")

    @property
    def n_coeffs(self) -> int:
        return self.order + 1

    @property
    def operator(self) -> str:
        return FAMILY_OPERATOR[self.family]


@dataclass(frozen=True)
class FilterResult:
    output: np.ndarray
    basis: np.ndarray  # (K+1, n, d) basis blocks


def _check_coeffs(spec: FilterSpec, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64).ravel()
    if theta.shape[0] != spec.n_coeffs:
        raise InputError(f"expected {spec.n_coeffs} filter coefficients, got {theta.shape[0]}")
    if not np.all(np.isfinite(theta)):
        raise NumericError("non-finite filter coefficients")
    return theta


def combine(theta: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """``sum_k theta_k * basis[k]`` accumulated in ascending k."""
    out = theta[0] * basis[0]
    for k in range(1, len(theta)):
        out += theta[k] * basis[k]
    return out


def chebyshev_basis(m: SparseMatrix, h: np.ndarray, order: int) -> np.ndarray:
    out = np.empty((order + 1,) + h.shape)
    out[0] = h
    if order >= 1:
        out[1] = spmm(m, h)
    for k in range(2, order + 1):
        out[k] = 2.0 * spmm(m, out[k - 1]) - out[k - 2]
    return out


def jacobi_recursion_coeffs(a: float, b: float, k: int) -> tuple[float, float, float]:
    """Coefficients of ``P_k = g x P_{k-1} + g' P_{k-1} + g'' P_{k-2}`` for k >= 2."""
    if k < 2:
        raise ParameterError("the three-term Jacobi recursion starts at k = 2")
    s = 2 * k + a + b
    den = k * (k + a + b) * (s - 2)
    if s - 2 == 0 or k + a + b == 0:
        raise ParameterError(f"Jacobi recursion denominator vanishes for a={a}, b={b}, k={k}")
    g = s * (s - 1) / (2 * k * (k + a + b))
    g1 = (s - 1) * (a * a - b * b) / (2 * den)
    g2 = -(k + a - 1) * (k + b - 1) * s / den
    return g, g1, g2


def jacobi_basis(m: SparseMatrix, h: np.ndarray, order: int, a: float, b: float) -> np.ndarray:
    out = np.empty((order + 1,) + h.shape)
    out[0] = h
    if order >= 1:
        out[1] = (a - b) / 2.0 * h + (a + b + 2) / 2.0 * spmm(m, h)
    for k in range(2, order + 1):
        g, g1, g2 = jacobi_recursion_coeffs(a, b, k)
        out[k] = g * spmm(m, out[k - 1]) + g1 * out[k - 1] + g2 * out[k - 2]
    return out


def monomial_basis(m: SparseMatrix, h: np.ndarray, order: int) -> np.ndarray:
    out = np.empty((order + 1,) + h.shape)
    out[0] = h
    for k in range(1, order + 1):
        out[k] = spmm(m, out[k - 1])
    return out


def bernstein_basis(m: SparseMatrix, h: np.ndarray, order: int) -> np.ndarray:
    """Blocks ``2^-K C(K,k) (2I - L)^(K-k) L^k h`` for a normalized Laplacian ``L``."""
    powers = monomial_basis(m, h, order)
    out = np.empty_like(powers)
    scale = 0.5**order
    for k in range(order + 1):
        t = powers[k]
        for _ in range(order - k):
            t = 2.0 * t - spmm(m, t)
        out[k] = (scale * comb(order, k)) * t
    return out


def chebyshev_nodes(order: int) -> np.ndarray:
    j = np.arange(order + 1)
    return np.cos((j + 0.5) * np.pi / (order + 1))


def chebyshev_values(x: np.ndarray, order: int) -> np.ndarray:
    """Matrix ``T[k, j] = T_k(x_j)`` for k = 0..order."""
    x = np.asarray(x, dtype=np.float64)
    t = np.empty((order + 1, len(x)))
    t[0] = 1.0
    if order >= 1:
        t[1] = x
    for k in range(2, order + 1):
        t[k] = 2.0 * x * t[k - 1] - t[k - 2]
    return t


def chebii_transform(order: int) -> np.ndarray:
    """Matrix ``A`` with effective coefficients ``c = A @ theta``."""
    return (2.0 / (order + 2)) * chebyshev_values(chebyshev_nodes(order), order)


def chebii_effective_coeffs(theta, order: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64).ravel()
    if theta.shape[0] != order + 1:
        raise InputError(f"expected {order + 1} coefficients, got {theta.shape[0]}")
    return chebii_transform(order) @ theta


def filter_basis(spec: FilterSpec, m: SparseMatrix, h: np.ndarray) -> np.ndarray:
    """Basis blocks ``B_k`` such that the filter output is ``sum_k theta_k B_k``."""
    h = np.asarray(h, dtype=np.float64)
    if m.n_rows != m.n_cols:
        raise InputError("graph operator must be square")
    if h.shape[0] != m.n_cols:
        raise InputError(f"operator is {m.shape}, features have {h.shape[0]} rows")
    K = spec.order
    if spec.family == "chebyshev":
        basis = chebyshev_basis(m, h, K)
    elif spec.family == "chebyshev_ii":
        # theta_j multiplies sum_k A[k, j] T_k(M) h
        cheb = chebyshev_basis(m, h, K)
        basis = np.tensordot(chebii_transform(K).T, cheb, axes=1)
    elif spec.family == "jacobi":
        basis = jacobi_basis(m, h, K, spec.jacobi_a, spec.jacobi_b)
    elif spec.family == "monomial":
        basis = monomial_basis(m, h, K)
    else:
        basis = bernstein_basis(m, h, K)
    return basis


def apply_filter(spec: FilterSpec, theta, m: SparseMatrix, h: np.ndarray) -> FilterResult:
    """Evaluate ``g_theta(M) h`` and keep the basis blocks."""
    theta = _check_coeffs(spec, theta)
    basis = filter_basis(spec, m, h)
    out = combine(theta, basis)
    if not np.all(np.isfinite(out)):
        raise NumericError(f"{spec.family} filter produced non-finite values (K={spec.order})")
    return FilterResult(out, basis)
