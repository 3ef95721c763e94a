"""Beta/Dirichlet invariant laws of the McKean-Vlasov replicator.

The invariant law of the replicator with a *frozen* measure is Dirichlet,
with parameter equal to the interior equilibrium of the frozen payoff.
Feeding the mean of that Dirichlet law back into the interaction gives a
map on Dirichlet parameters whose fixed point is the invariant law of the
nonlinear process.  For two types the fixed point has the closed form
``s = (a12 - a22) / (sigma^2 - delta)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (NoInteriorEquilibrium, NotContractive, RegimeError,
                     ToleranceExceeded)
from .simplex import (MeanSkew, ModelParams, as_payoff, check_c1, check_c2,
                      gauss_solve)
from .stats import dirichlet_was_bound


@dataclass(frozen=True)
class DirichletParams:
    alpha: np.ndarray

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float).reshape(-1)
        if a.size < 2 or not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise ValueError(f"Dirichlet parameters must be positive, got {a}")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def d(self) -> int:
        return self.alpha.size

    def sums_to_one(self, tol: float = 1e-9) -> bool:
        return abs(self.alpha.sum() - 1.0) <= tol

    def mean(self) -> np.ndarray:
        return self.alpha / self.alpha.sum()


@dataclass
class FixedPointReport:
    alpha_star: DirichletParams
    iterations: int
    final_delta: float
    converged: bool
    contraction_factor: float = float("nan")

    def to_dict(self) -> dict:
        return {"alpha_star": self.alpha_star.alpha.tolist(),
                "iterations": self.iterations,
                "final_delta": self.final_delta,
                "converged": self.converged}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def beta_s(params: ModelParams) -> float:
    """First Beta parameter (and mean) of the two-type invariant law."""
    params.check_beta_regime()
    A = params.payoff
    return float((A[0, 1] - A[1, 1]) / (params.sigma ** 2 - params.delta))


def _beta_map(params: ModelParams, m: float) -> float:
    A = params.payoff
    return (A[0, 1] - A[1, 1] + params.delta * m) / params.sigma ** 2


def beta_fixed_point_iterate(params: ModelParams, m0: float, tol: float = 1e-10,
                             max_iter: int = 1000) -> tuple:
    """Iterate ``m <- (a12 - a22 + delta m) / sigma^2`` from ``m0``.

    Stops at the first iterate whose residual certifies ``|m - s| <= tol``
    (the map contracts with factor ``delta / sigma^2``).  Returns
    ``(m_star, iterations)``.
    """
    params.check_beta_regime()
    if not 0 < m0 < 1:
        raise ValueError("m0 must lie in (0, 1)")
    q = params.delta / params.sigma ** 2
    m = m0
    for k in range(1, max_iter + 1):
        m = _beta_map(params, m)
        if abs(_beta_map(params, m) - m) <= tol * (1 - q):
            return m, k
    raise RegimeError(f"no convergence within {max_iter} iterations")


def perturbation_system(A, alpha, E, delta_eff: float) -> tuple:
    """Matrix and right-hand side of the linear system for the correction.

    With ``alpha_hat = alpha + P eps`` (``P`` adds ``eps`` to the first d-1
    coordinates and subtracts their sum from the last) the rows say that
    every entry of ``(A + delta_eff E) alpha_hat`` equals the first one.
    """
    A = as_payoff(A)
    d = A.shape[0]
    Ah = A + delta_eff * np.asarray(E, dtype=float)
    P = np.vstack([np.eye(d - 1), -np.ones((1, d - 1))])
    D = np.hstack([-np.ones((d - 1, 1)), np.eye(d - 1)])
    H = D @ Ah @ P
    rhs = -D @ Ah @ np.asarray(alpha, dtype=float)
    return H, rhs


def solve_perturbation(A, sigma: float, alpha, E, delta_eff: float,
                       c1_tol: float = 1e-3, check_tol: float = 1e-9) -> tuple:
    """Equilibrium of ``A + delta_eff E`` as a correction of ``alpha``.

    Returns ``(eps, alpha_hat)`` with ``alpha_hat`` a :class:`DirichletParams`.
    """
    A = as_payoff(A)
    d = A.shape[0]
    alpha = np.asarray(alpha.alpha if isinstance(alpha, DirichletParams) else alpha,
                       dtype=float)
    E = np.asarray(E, dtype=float)
    if not np.array_equal(E, -E.T):
        raise ValueError("E must be skew-symmetric")
    if not check_c1(A, sigma).holds(c1_tol):
        raise RegimeError("payoff matrix violates the fitness-equivalence condition")
    if alpha.shape != (d,) or np.any(alpha <= 0) or abs(alpha.sum() - 1) > 1e-9:
        raise ValueError("alpha must be a strictly positive vector summing to 1")
    H, rhs = perturbation_system(A, alpha, E, delta_eff)
    try:
        eps = gauss_solve(H, rhs)
    except np.linalg.LinAlgError as exc:
        raise NoInteriorEquilibrium(f"singular perturbation system: {exc}") from None
    alpha_hat = np.empty(d)
    alpha_hat[:-1] = alpha[:-1] + eps
    alpha_hat[-1] = alpha[-1] - eps.sum()
    if np.any(alpha_hat <= 0):
        raise ToleranceExceeded(
            f"tolerance-exceeded: alpha_hat={alpha_hat} leaves the open simplex")
    v = (A + delta_eff * E - 0.5 * sigma ** 2) @ alpha_hat
    if np.ptp(v) > check_tol * max(1.0, np.max(np.abs(v))):
        raise ArithmeticError(f"perturbed equilibrium check failed: spread {np.ptp(v):.3e}")
    return eps, DirichletParams(alpha_hat)


def _mean_weight(params: ModelParams, mu: DirichletParams) -> float:
    if not isinstance(params.interaction, MeanSkew):
        raise TypeError("t_map supports the mean-skew interaction")
    return float(mu.mean()[0])


def t_map(params: ModelParams, mu) -> DirichletParams:
    """Dirichlet parameter of the invariant law with the measure frozen at ``D_mu``."""
    if not isinstance(mu, DirichletParams):
        mu = DirichletParams(mu)
    if mu.d != params.d:
        raise ValueError("dimension mismatch between mu and the payoff matrix")
    m1 = _mean_weight(params, mu)
    if params.d == 2:
        params.check_beta_regime()
        p = _beta_map(params, m1)
        if not 0 < p < 1:
            raise RegimeError(f"frozen Beta parameter {p} outside (0, 1)")
        return DirichletParams([p, 1.0 - p])
    base = check_c2(params.payoff, params.sigma)
    _, alpha_hat = solve_perturbation(params.payoff, params.sigma, base.alpha,
                                      params.skew, params.delta * m1)
    return alpha_hat


def lipschitz_ratio(params: ModelParams, mu, nu) -> float:
    """Observed ``|T mu - T nu|_1 / |mu - nu|_1``."""
    mu = mu if isinstance(mu, DirichletParams) else DirichletParams(mu)
    nu = nu if isinstance(nu, DirichletParams) else DirichletParams(nu)
    num = np.abs(t_map(params, mu).alpha - t_map(params, nu).alpha).sum()
    den = np.abs(mu.alpha - nu.alpha).sum()
    return float(num / den)


def dirichlet_fixed_point(params: ModelParams, mu0=None, tol: float = 1e-10,
                          max_iter: int = 500) -> FixedPointReport:
    """Iterate :func:`t_map` until the Dirichlet Wasserstein bound between an
    iterate and its image drops below ``tol``.

    Raises :class:`NotContractive` when that bound grows three times in a row.
    """
    d = params.d
    mu = DirichletParams(np.full(d, 1.0 / d) if mu0 is None else mu0)
    history = []
    growth = 0
    mu = t_map(params, mu)
    for k in range(1, max_iter + 1):
        nxt = t_map(params, mu)
        delta = dirichlet_was_bound(nxt.alpha, mu.alpha)
        if history and delta > history[-1]:
            growth += 1
            if growth >= 3:
                raise NotContractive("not-contractive-at-these-parameters")
        else:
            growth = 0
        history.append(delta)
        if delta <= tol:
            ratios = [b / a for a, b in zip(history, history[1:]) if a > 0]
            factor = max(ratios) if ratios else 0.0
            return FixedPointReport(mu, k, float(delta), True, float(factor))
        mu = nxt
    return FixedPointReport(mu, max_iter, float(history[-1]), False, float("nan"))


def hofbauer_imhof_beta(params: ModelParams) -> tuple:
    """Beta parameters ``((a12-a22)/sigma^2, (a21-a11)/sigma^2)`` without interaction."""
    A = params.payoff
    s2 = params.sigma ** 2
    return float((A[0, 1] - A[1, 1]) / s2), float((A[1, 0] - A[0, 0]) / s2)

