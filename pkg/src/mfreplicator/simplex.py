"""Simplex geometry and payoff algebra.

Vectors live in the last axis of numpy arrays, so every function here also
accepts stacks of points of shape ``(..., d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (DimensionError, EquilibriumNotInterior,
                     NoInteriorEquilibrium, RegimeError, SimplexError)

SUM_TOL = 1e-9
NEG_TOL = 1e-12
PIVOT_TOL = 1e-12


class SimplexPoint:
    """A point of the probability simplex, stored as a read-only array.

    Small round-off is repaired: coordinates in ``[-1e-12, 0)`` are set to
    zero and sums within ``1e-9`` of one are renormalised.  Anything worse
    raises :class:`SimplexError`.
    """

    __slots__ = ("coords",)

    def __init__(self, coords):
        x = np.array(coords, dtype=float).reshape(-1)
        if x.size < 1 or not np.all(np.isfinite(x)):
            raise SimplexError(f"not a finite vector: {coords!r}")
        if np.any(x < -NEG_TOL):
            raise SimplexError(f"negative coordinate in {x}")
        x[x < 0] = 0.0
        total = x.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise SimplexError(f"coordinates sum to {total!r}, not 1")
        x /= total
        x.setflags(write=False)
        self.coords = x

    @property
    def d(self) -> int:
        return self.coords.size

    def __array__(self, dtype=None, copy=None):
        return self.coords if dtype is None else self.coords.astype(dtype)

    def __len__(self):
        return self.coords.size

    def __getitem__(self, i):
        return self.coords[i]

    def __eq__(self, other):
        if not isinstance(other, SimplexPoint):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())

    def __repr__(self):
        return f"SimplexPoint({self.coords.tolist()})"

    @classmethod
    def vertex(cls, i: int, d: int) -> "SimplexPoint":
        e = np.zeros(d)
        e[i] = 1.0
        return cls(e)

    @classmethod
    def center(cls, d: int) -> "SimplexPoint":
        return cls(np.full(d, 1.0 / d))


def is_tangent(v, tol: float = 1e-10) -> bool:
    return bool(np.all(np.abs(np.sum(v, axis=-1)) <= tol))


def as_payoff(A) -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"payoff matrix must be square, got shape {A.shape}")
    if A.shape[0] < 2:
        raise DimensionError("payoff matrix needs d >= 2")
    if not np.all(np.isfinite(A)):
        raise ValueError("payoff matrix has non-finite entries")
    return A


def skew_block(d: int) -> np.ndarray:
    """The d x d matrix with [[0, 1], [-1, 0]] in its top-left corner."""
    E = np.zeros((d, d))
    E[0, 1] = 1.0
    E[1, 0] = -1.0
    return E


@dataclass(frozen=True)
class MeanSkew:
    """Interaction ``delta * mean(y_1) * E x`` for a skew-symmetric ``E``.

    ``E=None`` means the default block matrix of :func:`skew_block`.
    """

    E: Optional[np.ndarray] = None

    def matrix(self, d: int) -> np.ndarray:
        if self.E is None:
            return skew_block(d)
        E = np.asarray(self.E, dtype=float)
        if E.shape != (d, d):
            raise DimensionError(f"E has shape {E.shape}, expected {(d, d)}")
        return E

    def __post_init__(self):
        if self.E is not None:
            E = np.array(self.E, dtype=float)
            if E.ndim != 2 or E.shape[0] != E.shape[1]:
                raise DimensionError("E must be square")
            if not np.array_equal(E, -E.T):
                raise ValueError("E must be exactly skew-symmetric")
            E.setflags(write=False)
            object.__setattr__(self, "E", E)


@dataclass(frozen=True)
class PairwiseKernel:
    """General pairwise interaction ``upsilon(x, y)``.

    ``fn`` must broadcast over leading axes: ``fn(x[..., d], y[..., d])``
    returns an array of shape ``(..., d)``.  The interaction strength is part
    of ``fn``; :attr:`ModelParams.delta` is not applied on top of it.
    """

    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def average(self, x: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Mean over co-particles: ``out[i] = mean_j fn(x[i], ys[j])``."""
        x = np.asarray(x, dtype=float)
        ys = np.asarray(ys, dtype=float)
        vals = self.fn(x[..., :, None, :], ys[..., None, :, :])
        return vals.mean(axis=-2)


def mean_skew_kernel(delta: float, E) -> PairwiseKernel:
    """``upsilon(x, y) = delta * y_1 * E x`` written as a pairwise kernel."""
    E = np.asarray(E, dtype=float)
    return PairwiseKernel(lambda x, y: delta * y[..., :1] * (x @ E.T))


@dataclass(frozen=True)
class ModelParams:
    payoff: np.ndarray
    sigma: float
    delta: float = 0.0
    interaction: object = field(default_factory=MeanSkew)

    def __post_init__(self):
        A = as_payoff(self.payoff)
        A.setflags(write=False)
        object.__setattr__(self, "payoff", A)
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative")
        if not self.delta >= 0:
            raise ValueError("delta must be nonnegative")
        if not isinstance(self.interaction, (MeanSkew, PairwiseKernel)):
            raise TypeError("interaction must be MeanSkew or PairwiseKernel")
        if isinstance(self.interaction, MeanSkew):
            self.interaction.matrix(A.shape[0])

    @property
    def d(self) -> int:
        return self.payoff.shape[0]

    @property
    def a_tilde(self) -> np.ndarray:
        """``A - sigma^2 I``, the fitness matrix entering the drift."""
        return self.payoff - self.sigma ** 2 * np.eye(self.d)

    @property
    def skew(self) -> np.ndarray:
        if not isinstance(self.interaction, MeanSkew):
            raise TypeError("pairwise-kernel interaction has no matrix form")
        return self.interaction.matrix(self.d)

    def replace(self, **changes) -> "ModelParams":
        kw = dict(payoff=self.payoff, sigma=self.sigma, delta=self.delta,
                  interaction=self.interaction)
        kw.update(changes)
        return ModelParams(**kw)

    def check_beta_regime(self) -> None:
        """Raise unless d=2 and 0 <= delta < min(sigma^2, a12-a22, a21-a11)."""
        if self.d != 2:
            raise RegimeError(f"two-type regime requires d=2, got d={self.d}")
        if not isinstance(self.interaction, MeanSkew):
            raise RegimeError("two-type regime requires the mean-skew interaction")
        if not np.array_equal(self.skew, skew_block(2)):
            raise RegimeError("two-type regime assumes E = [[0, 1], [-1, 0]]")
        A = self.payoff
        g12 = A[0, 1] - A[1, 1]
        g21 = A[1, 0] - A[0, 0]
        if self.sigma <= 0 or g12 <= 0 or g21 <= 0:
            raise RegimeError("need sigma > 0, a12 > a22 and a21 > a11")
        bound = min(self.sigma ** 2, g12, g21)
        if not 0 <= self.delta < bound:
            raise RegimeError(f"delta={self.delta} outside [0, {bound})")


def project_tangent(F, x) -> np.ndarray:
    """``x * (F - <x, F> 1)``, the tangent projection of a fitness vector."""
    F = np.asarray(F, dtype=float)
    x = np.asarray(x, dtype=float)
    if F.shape[-1] != x.shape[-1]:
        raise DimensionError(f"dimension mismatch: {F.shape} vs {x.shape}")
    avg = np.sum(x * F, axis=-1, keepdims=True)
    return x * (F - avg)


@dataclass(frozen=True)
class C1Residuals:
    """Residuals ``a_ij + a_ji - a_ii - a_jj - sigma^2`` over pairs ``i < j``."""

    pairs: tuple
    values: np.ndarray

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def holds(self, tol: float = 1e-3) -> bool:
        return self.max_abs() <= tol


def check_c1(A, sigma: float) -> C1Residuals:
    A = as_payoff(A)
    d = A.shape[0]
    pairs = tuple((i, j) for i in range(d) for j in range(i + 1, d))
    vals = np.array([A[i, j] + A[j, i] - A[i, i] - A[j, j] - sigma ** 2
                     for i, j in pairs])
    return C1Residuals(pairs, vals)


def gauss_solve(M, rhs, pivot_tol: float = PIVOT_TOL) -> np.ndarray:
    """Gaussian elimination with partial pivoting.

    Raises ``np.linalg.LinAlgError`` when a pivot falls below ``pivot_tol``.
    """
    M = np.array(M, dtype=float)
    b = np.array(rhs, dtype=float)
    n = M.shape[0]
    for k in range(n):
        p = k + int(np.argmax(np.abs(M[k:, k])))
        if abs(M[p, k]) < pivot_tol:
            raise np.linalg.LinAlgError(f"pivot {M[p, k]:.3e} in column {k}")
        if p != k:
            M[[k, p]] = M[[p, k]]
            b[[k, p]] = b[[p, k]]
        f = M[k + 1:, k] / M[k, k]
        M[k + 1:, k:] -= f[:, None] * M[k, k:]
        b[k + 1:] -= f * b[k]
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - M[k, k + 1:] @ x[k + 1:]) / M[k, k]
    return x


@dataclass(frozen=True)
class C2Solution:
    alpha: np.ndarray
    c: float


def solve_equilibrium(M) -> C2Solution:
    """Solve ``M alpha = c 1`` with ``sum(alpha) = 1`` (bordered system)."""
    M = np.asarray(M, dtype=float)
    d = M.shape[0]
    K = np.zeros((d + 1, d + 1))
    K[:d, :d] = M
    K[:d, d] = -1.0
    K[d, :d] = 1.0
    rhs = np.zeros(d + 1)
    rhs[d] = 1.0
    try:
        sol = gauss_solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise NoInteriorEquilibrium(f"no-interior-equilibrium: {exc}") from None
    return C2Solution(sol[:d], float(sol[d]))


def check_c2(A, sigma: float) -> C2Solution:
    """Interior equilibrium of the modified payoff ``a_ij - sigma^2 / 2``."""
    A = as_payoff(A)
    sol = solve_equilibrium(A - 0.5 * sigma ** 2)
    if np.any(sol.alpha <= 0):
        raise EquilibriumNotInterior(
            f"equilibrium-not-interior: alpha={sol.alpha}", alpha=sol.alpha)
    return sol


def invasion_rates(x, A, sigma: float) -> np.ndarray:
    """``h(x) = Phi(x) - <x, Phi(x)>`` with ``Phi(x) = (A - sigma^2 I) x``."""
    A = as_payoff(A)
    x = np.asarray(x, dtype=float)
    phi = x @ (A - sigma ** 2 * np.eye(A.shape[0])).T
    return phi - np.sum(x * phi, axis=-1, keepdims=True)


def effective_payoff(params: ModelParams, m) -> np.ndarray:
    """Frozen-measure fitness matrix ``A~ + delta * m_1 * E``."""
    if not isinstance(params.interaction, MeanSkew):
        raise TypeError("effective payoff is undefined for a pairwise kernel")
    m = np.asarray(m, dtype=float)
    return params.a_tilde + params.delta * m[0] * params.skew
