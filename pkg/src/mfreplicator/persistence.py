"""Persistence checks: boundary equilibria, the weight vector ``p``, the
Lyapunov function ``H`` and extinction-neighbourhood occupation.

Ergodic boundary measures are approximated by point masses at the
equilibria of the deterministic replicator on each proper face.  For two
types those are the only ones; for more types periodic or chaotic
boundary behaviour is not detected and reports say so.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import NoInteriorEquilibrium
from .lp import linprog
from .simplex import as_payoff, invasion_rates, project_tangent, solve_equilibrium

P_MIN = 1e-6
H_CAP = 1e6
RESIDUAL_TOL = 1e-9


@dataclass
class BoundaryEquilibrium:
    support: tuple
    point: np.ndarray
    rates: np.ndarray  # full invasion-rate vector h(point); zero on the support

    def absent_rates(self) -> dict:
        return {i: float(self.rates[i]) for i in range(self.point.size)
                if i not in self.support}

    def to_dict(self) -> dict:
        return {"support": list(self.support),
                "point": self.point.tolist(),
                "rates": self.rates.tolist()}


@dataclass
class PersistenceCertificate:
    p: np.ndarray
    rho: float
    equilibria_checked: list = field(default_factory=list)
    boundary_cycles_checked: bool = True

    def verify(self, tol: float = 1e-9) -> bool:
        """Re-check ``<p, h(x*)> >= rho`` without trusting the solver."""
        if np.any(self.p <= 0):
            return False
        return all(float(self.p @ eq.rates) >= self.rho - tol
                   for eq in self.equilibria_checked)

    def to_dict(self) -> dict:
        return {"p": self.p.tolist(),
                "rho": self.rho,
                "equilibria": [eq.to_dict() for eq in self.equilibria_checked],
                "boundary_cycles_checked": self.boundary_cycles_checked}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def face_equilibria(A, sigma: float) -> list:
    """Vertices and face-interior equilibria of ``x' = Pi_T[(A - sigma^2 I) x]``
    on every proper face of the simplex."""
    A = as_payoff(A)
    d = A.shape[0]
    if d > 10:
        raise ValueError("face enumeration is limited to d <= 10")
    At = A - sigma ** 2 * np.eye(d)
    found = []
    for size in range(1, d):
        for S in itertools.combinations(range(d), size):
            x = np.zeros(d)
            if size == 1:
                x[S[0]] = 1.0
            else:
                idx = np.array(S)
                try:
                    sol = solve_equilibrium(At[np.ix_(idx, idx)])
                except (NoInteriorEquilibrium, np.linalg.LinAlgError):
                    continue
                if np.any(sol.alpha <= 0):
                    continue
                x[idx] = sol.alpha
            if np.max(np.abs(project_tangent(x @ At.T, x))) > RESIDUAL_TOL:
                continue
            found.append(BoundaryEquilibrium(S, x, invasion_rates(x, A, sigma)))
    return found


def find_p(equilibria, A=None, sigma=None, p_min: float = P_MIN) -> Optional[PersistenceCertificate]:
    """Maximise ``rho`` subject to ``<p, h(x*)> >= rho`` at every equilibrium,
    ``sum(p) = d`` and ``p >= p_min``.

    Returns a certificate when the optimum is positive and ``None``
    otherwise.  ``A`` and ``sigma`` are only used to recompute the rates.
    """
    equilibria = list(equilibria)
    if not equilibria:
        raise ValueError("need at least one equilibrium")
    if A is not None:
        for eq in equilibria:
            eq.rates = invasion_rates(eq.point, A, sigma)
    d = equilibria[0].point.size
    H = np.array([eq.rates for eq in equilibria])
    # variables: q = p - p_min (d), rho+, rho-
    c = np.zeros(d + 2)
    c[d], c[d + 1] = -1.0, 1.0
    A_ub = np.hstack([-H, np.ones((len(H), 1)), -np.ones((len(H), 1))])
    b_ub = p_min * H.sum(axis=1)
    A_eq = np.zeros((1, d + 2))
    A_eq[0, :d] = 1.0
    res = linprog(c, A_ub, b_ub, A_eq, [d * (1 - p_min)])
    p = res.x[:d] + p_min
    rho = float(res.x[d] - res.x[d + 1])
    if not rho > 1e-12:
        return None
    # exact optimum may sit a rounding error above the achieved minimum
    rho = min(rho, float(np.min(H @ p)))
    cert = PersistenceCertificate(p, rho, equilibria, boundary_cycles_checked=d <= 2)
    if not cert.verify():
        raise ArithmeticError("certificate failed independent verification")
    return cert


def boundary_distance(x) -> np.ndarray:
    """Euclidean distance to the relative boundary of the simplex."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    return np.min(x, axis=-1) * math.sqrt(d / (d - 1))


def log_lyapunov_h(x, p, r: float) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    lam = r / np.min(p)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return -lam * np.sum(p * np.log(x), axis=-1)


def lyapunov_h(x, p, r: float = 1.0):
    """``H(x) = prod_j x_j^(-lambda p_j)`` with ``lambda = r / min(p)``.

    Boundary points (and overflow) give ``inf``.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    logh = log_lyapunov_h(x, p, r)
    with np.errstate(over="ignore"):
        out = np.exp(logh)
    return float(out) if np.ndim(out) == 0 else out


def occupation_ext(states, eps_list) -> dict:
    """Fraction of recorded states with some coordinate below ``eps``.

    ``states`` is an array ``(..., d)`` or an iterable of such arrays
    (snapshots), scanned once.
    """
    eps = sorted(float(e) for e in eps_list)
    chunks = [states] if isinstance(states, np.ndarray) else states
    counts = np.zeros(len(eps), dtype=np.int64)
    total = 0
    for chunk in chunks:
        chunk = np.asarray(chunk, dtype=float)
        mins = np.min(chunk.reshape(-1, chunk.shape[-1]), axis=-1)
        total += mins.size
        mins.sort()
        counts += np.searchsorted(mins, eps, side="left")
    if total == 0:
        raise ValueError("empty series")
    return {e: float(c / total) for e, c in zip(eps, counts)}


def write_occupation_csv(occ: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "fraction"])
        for e, f in sorted(occ.items()):
            w.writerow([f"{e:.17g}", f"{f:.17g}"])


@dataclass
class DriftReport:
    alpha: float
    C: float
    n_points: int
    zero_variance: bool
    cap: float

    @property
    def contracting(self) -> bool:
        return self.alpha < 1

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "C": self.C, "n_points": self.n_points,
                "zero_variance": self.zero_variance, "contracting": self.contracting,
                "cap": self.cap}


def capped_h_means(states_iter: Iterable, p, r: float, cap: float = H_CAP) -> np.ndarray:
    """Particle average of ``min(H, cap)`` for each snapshot."""
    out = []
    for X in states_iter:
        h = np.minimum(np.asarray(lyapunov_h(np.asarray(X), p, r)), cap)
        out.append(float(np.mean(h)))
    return np.array(out)


def fit_drift(series, window: int = 1, cap: float = H_CAP) -> DriftReport:
    """Least-squares fit of ``Hbar(k+1) = alpha Hbar(k) + C`` after averaging
    ``series`` over consecutive blocks of ``window`` entries."""
    series = np.asarray(series, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    n = series.size // window
    if n < 3:
        raise ValueError("insufficient data for the drift fit")
    avg = series[:n * window].reshape(n, window).mean(axis=1)
    prev, nxt = avg[:-1], avg[1:]
    if np.ptp(prev) <= 1e-12 * max(1.0, abs(prev.mean())):
        return DriftReport(0.0, float(nxt.mean()), n, True, cap)
    alpha, C = np.polyfit(prev, nxt, 1)
    return DriftReport(float(alpha), float(C), n, False, cap)


def empirical_drift_check(states_iter: Iterable, p, r: float = 1.0, window: int = 1,
                          cap: float = H_CAP) -> DriftReport:
    """Drift fit on particle averages of the capped Lyapunov function."""
    return fit_drift(capped_h_means(states_iter, p, r, cap), window, cap)
