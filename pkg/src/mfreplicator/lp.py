"""Dense two-phase tableau simplex method with Bland's rule.

Meant for the tiny programs of the persistence check (a handful of
variables, at most a few hundred constraints).  Solves::

    minimize    c @ x
    subject to  A_ub @ x <= b_ub,  A_eq @ x == b_eq,  x >= 0
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LPInfeasible, LPUnbounded

TOL = 1e-10


@dataclass
class LPResult:
    x: np.ndarray
    fun: float
    iterations: int


def _pivot(T, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _run(T, basis, n_cols, max_iter):
    """Optimise the tableau in place; the last row holds reduced costs."""
    it = 0
    while True:
        cost = T[-1, :n_cols]
        entering = np.flatnonzero(cost < -TOL)
        if entering.size == 0:
            return it
        col = int(entering[0])
        column = T[:-1, col]
        pos = column > TOL
        if not pos.any():
            raise LPUnbounded("objective is unbounded below")
        ratios = np.full(column.shape, np.inf)
        ratios[pos] = T[:-1, -1][pos] / column[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + TOL * max(1.0, abs(best)))
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
        it += 1
        if it > max_iter:
            raise ArithmeticError("simplex iteration limit reached")


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
            max_iter: int = 10000) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq
    if m == 0:
        if np.any(c < 0):
            raise LPUnbounded("objective is unbounded below")
        return LPResult(np.zeros(n), 0.0, 0)

    # columns: x | slacks | artificials | rhs
    n_cols = n + m_ub + m
    T = np.zeros((m + 1, n_cols + 1))
    T[:m_ub, :n] = A_ub
    T[:m_ub, n:n + m_ub] = np.eye(m_ub)
    T[m_ub:m, :n] = A_eq
    T[:m, -1] = np.concatenate([b_ub, b_eq])
    neg = T[:m, -1] < 0
    T[:m][neg] *= -1
    T[:m, n + m_ub:n_cols] = np.eye(m)
    basis = list(range(n + m_ub, n_cols))

    # phase 1: minimise the sum of artificials
    T[-1, :] = -T[:m].sum(axis=0)
    T[-1, n + m_ub:n_cols] = 0.0
    it = _run(T, basis, n_cols, max_iter)
    if T[-1, -1] < -1e-9 * max(1.0, np.abs(T[:m, -1]).max()):
        raise LPInfeasible("constraints are infeasible")

    # drive remaining artificials out of the basis
    n_real = n + m_ub
    keep = []
    for r in range(m):
        if basis[r] >= n_real:
            cand = np.flatnonzero(np.abs(T[r, :n_real]) > 1e-9)
            if cand.size:
                _pivot(T, r, int(cand[0]))
                basis[r] = int(cand[0])
                keep.append(r)
        else:
            keep.append(r)
    rows = keep + [m]
    T = np.hstack([T[rows, :n_real], T[rows, -1:]])
    basis = [basis[r] for r in keep]

    # phase 2
    T[-1, :] = 0.0
    T[-1, :n] = c
    for r, b in enumerate(basis):
        if T[-1, b] != 0.0:
            T[-1] -= T[-1, b] * T[r]
    it += _run(T, basis, n_real, max_iter)
    x = np.zeros(n_real)
    for r, b in enumerate(basis):
        x[b] = T[r, -1]
    return LPResult(x[:n], float(c @ x[:n]), it)
