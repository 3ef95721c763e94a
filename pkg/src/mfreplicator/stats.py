"""Sampling and goodness-of-fit machinery.

Samplers take an explicit ``numpy.random.Generator`` (see
:func:`mfreplicator.rng.generator` for named, reproducible streams).
Gamma variates are produced on the log scale: parameters here are often
well below one, and ``Gamma(shape)`` for tiny shapes underflows double
precision long before its logarithm does.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .rng import generator
from .special import beta_fn, log_beta, reg_inc_beta

LEVELS = (0.90, 0.95, 0.99)
U_CLAMP = 1e-15


# ------------------------------------------------------------------ samplers

def sample_log_gamma(shape: float, stream: np.random.Generator, size=None):
    """``log G`` with ``G ~ Gamma(shape, 1)``.

    Shapes below one use ``G = G' U^(1/shape)``, ``G' ~ Gamma(shape + 1)``.
    """
    if not shape > 0:
        raise ValueError("gamma shape must be positive")
    if shape >= 1:
        return np.log(stream.standard_gamma(shape, size))
    g = stream.standard_gamma(shape + 1.0, size)
    u = stream.random(size)
    return np.log(g) + np.log1p(-u) / shape


def sample_gamma(shape: float, stream: np.random.Generator, size=None):
    return np.exp(sample_log_gamma(shape, stream, size))


def sample_beta(a: float, b: float, stream: np.random.Generator, size=None):
    la = sample_log_gamma(a, stream, size)
    lb = sample_log_gamma(b, stream, size)
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(lb - la))


def sample_dirichlet(alpha, stream: np.random.Generator, size=None):
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 1 or np.any(alpha <= 0):
        raise ValueError("Dirichlet parameters must be a positive vector")
    n = 1 if size is None else size
    logs = np.stack([sample_log_gamma(a, stream, n) for a in alpha], axis=-1)
    logs -= logs.max(axis=-1, keepdims=True)
    w = np.exp(logs)
    out = w / w.sum(axis=-1, keepdims=True)
    return out[0] if size is None else out


# ----------------------------------------------------------------- reporting

@dataclass
class TestReport:
    method: str
    statistic: float
    quantiles: dict
    reject: dict
    B: int
    seed: int
    n: int
    p_value: Optional[float] = None
    null: Optional[np.ndarray] = field(default=None, repr=False)

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {"method": self.method,
                "statistic": self.statistic,
                "quantiles": {f"{lv:.2f}": q for lv, q in self.quantiles.items()},
                "reject": {f"{lv:.2f}": r for lv, r in self.reject.items()},
                "p_value": self.p_value,
                "n": self.n,
                "B": self.B,
                "seed": self.seed}


def _report(method, stat, null, levels, seed, n):
    null = np.sort(np.asarray(null, dtype=float))
    qs = {float(lv): float(np.quantile(null, lv)) for lv in sorted(levels)}
    rej = {lv: bool(stat > q) for lv, q in qs.items()}
    p = (1 + np.count_nonzero(null >= stat)) / (null.size + 1)
    return TestReport(method, float(stat), qs, rej, int(null.size), seed, n,
                      float(p), null)


# ----------------------------------------------------------- Anderson-Darling

def ad_statistic_uniform(u) -> float:
    """``A^2`` of probability-integral-transformed values against U(0, 1)."""
    u = np.clip(np.sort(np.asarray(u, dtype=float)), U_CLAMP, 1 - U_CLAMP)
    n = u.size
    j = np.arange(1, n + 1)
    return float(-n - np.sum((2 * j - 1) * (np.log(u) + np.log1p(-u[::-1]))) / n)


def anderson_darling_statistic(sample, a: float, b: float) -> float:
    return ad_statistic_uniform(reg_inc_beta(np.asarray(sample, dtype=float), a, b))


def ad_null(n: int, B: int, seed: int = 0) -> np.ndarray:
    """Monte-Carlo null distribution of ``A^2`` for a fully specified law.

    With known parameters the statistic is distribution free, so uniform
    samples calibrate every null at once.
    """
    out = np.empty(B)
    for r in range(B):
        out[r] = ad_statistic_uniform(generator(seed, "ad-null", n, r).random(n))
    return np.sort(out)


def anderson_darling(sample, a: float, b: float, B: int = 1000,
                     levels=LEVELS, seed: int = 0, null=None) -> TestReport:
    """Anderson-Darling test of ``sample`` against ``Beta(a, b)``.

    ``null`` may carry a precomputed :func:`ad_null` array for this ``n``.
    """
    sample = np.asarray(sample, dtype=float)
    n = sample.size
    if n < 8:
        raise ValueError("Anderson-Darling needs at least 8 observations")
    stat = anderson_darling_statistic(sample, a, b)
    if null is None:
        null = ad_null(n, B, seed)
    return _report("AndersonDarling", stat, null, levels, seed, n)


# ------------------------------------------------------------- L2 statistic

def tn_statistic(sample, a: float, b: float) -> float:
    """``n * int_0^1 (S_n(t) - t^a (1-t)^b / B(a, b))^2 dt`` evaluated exactly.

    ``S_n(t) = mean_j ((a+b) Y_j - a) 1{Y_j >= t}`` is a step function, so
    the square of it integrates segment by segment; the cross term and the
    square of the density-like term reduce to incomplete beta functions.
    """
    y = np.sort(np.asarray(sample, dtype=float))
    if y.size == 0:
        raise ValueError("empty sample")
    if np.any((y < 0) | (y > 1)):
        raise ValueError("sample must lie in [0, 1]")
    n = y.size
    c = (a + b) * y - a
    tail = np.cumsum(c[::-1])[::-1] / n
    gaps = np.diff(y, prepend=0.0)
    square = float(np.sum(tail ** 2 * gaps))
    lb = log_beta(a, b)
    cross = math.exp(log_beta(a + 1, b + 1) - lb) * float(
        np.sum(c * reg_inc_beta(y, a + 1, b + 1))) / n
    g2 = math.exp(log_beta(2 * a + 1, 2 * b + 1) - 2 * lb)
    return n * (square - 2 * cross + g2)


def tn_null(n: int, a: float, b: float, B: int = 5000, seed: int = 0,
            workers: int = 1) -> np.ndarray:
    """``B`` values of ``T_n`` on independent ``Beta(a, b)`` samples of size ``n``.

    Replication ``r`` draws from the sub-stream ``(seed, "bootstrap", r)``.
    """
    def one(r):
        return tn_statistic(sample_beta(a, b, generator(seed, "bootstrap", r), n), a, b)

    if workers <= 1:
        vals = [one(r) for r in range(B)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(one, range(B)))
    return np.array(vals)


def bootstrap_quantiles(n: int, a: float, b: float, B: int = 5000,
                        levels=LEVELS, seed: int = 0, workers: int = 1) -> dict:
    if B < 1000:
        raise ValueError("use at least B = 1000 replications")
    null = tn_null(n, a, b, B, seed, workers)
    return {float(lv): float(np.quantile(null, lv)) for lv in sorted(levels)}


def tn_test(sample, a: float, b: float, B: int = 5000, levels=LEVELS,
            seed: int = 0, null=None, workers: int = 1) -> TestReport:
    sample = np.asarray(sample, dtype=float)
    stat = tn_statistic(sample, a, b)
    if null is None:
        null = tn_null(sample.size, a, b, B, seed, workers)
    return _report("TnL2", stat, null, levels, seed, sample.size)


# ---------------------------------------------------------------- Wasserstein

def wasserstein1_1d(x, y) -> float:
    """Wasserstein-1 distance between two empirical laws on the line."""
    x = np.sort(np.asarray(x, dtype=float).ravel())
    y = np.sort(np.asarray(y, dtype=float).ravel())
    if x.size == 0 or y.size == 0:
        raise ValueError("empty sample")
    if x.size == y.size:
        return float(np.mean(np.abs(x - y)))
    pts = np.sort(np.concatenate([x, y]))
    widths = np.diff(pts)
    Fx = np.searchsorted(x, pts[:-1], side="right") / x.size
    Fy = np.searchsorted(y, pts[:-1], side="right") / y.size
    return float(np.sum(np.abs(Fx - Fy) * widths))


def dirichlet_was_bound(a, b, tol: float = 1e-9) -> float:
    """``sum_{i<d} 2 (d - i) |a_i - b_i|`` for parameter vectors summing to one."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("parameter vectors must have the same length")
    if abs(a.sum() - 1) > tol or abs(b.sum() - 1) > tol:
        raise ValueError("Dirichlet parameters must sum to 1")
    d = a.size
    w = 2.0 * (d - np.arange(1, d))
    return float(np.sum(w * np.abs(a[:-1] - b[:-1])))


def rationalize(a, denom_N: int) -> np.ndarray:
    """Integer counts ``m`` with ``m / denom_N`` close to ``a`` and ``sum(m) = denom_N``."""
    a = np.asarray(a, dtype=float)
    m = np.rint(a * denom_N).astype(np.int64)
    m[-1] = denom_N - m[:-1].sum()
    if np.any(m <= 0):
        raise ValueError(f"invalid rationalization: counts {m.tolist()} for denom {denom_N}")
    return m


def dirichlet_coupled_pair(a, b, denom_N: int, stream: np.random.Generator,
                           size=None) -> tuple:
    """Coupled ``(X, Y)`` with ``X ~ Dir(m / N)``, ``Y ~ Dir(n / N)``.

    Both vectors are block sums of the same ``N`` i.i.d. ``Gamma(1/N)``
    variables, normalised by their total.  Consecutive Gammas that fall in
    the same block for both partitions are summed in one draw (a sum of
    ``L`` of them is ``Gamma(L/N)``), which gives the same joint law with at
    most ``2d - 1`` draws per pair.
    """
    m = rationalize(a, denom_N)
    k = rationalize(b, denom_N)
    cm = np.concatenate([[0], np.cumsum(m)])
    ck = np.concatenate([[0], np.cumsum(k)])
    cuts = np.union1d(cm, ck)
    lengths = np.diff(cuts)
    starts = cuts[:-1]
    block_x = np.searchsorted(cm, starts, side="right") - 1
    block_y = np.searchsorted(ck, starts, side="right") - 1
    n = 1 if size is None else size
    logs = np.stack([sample_log_gamma(L / denom_N, stream, n) for L in lengths], axis=-1)
    logs -= logs.max(axis=-1, keepdims=True)
    w = np.exp(logs)
    d = m.size
    X = np.zeros((n, d))
    Y = np.zeros((n, d))
    for s in range(lengths.size):
        X[:, block_x[s]] += w[:, s]
        Y[:, block_y[s]] += w[:, s]
    total = w.sum(axis=-1, keepdims=True)
    X /= total
    Y /= total
    if size is None:
        return X[0], Y[0]
    return X, Y


def coupled_was_estimate(a, b, denom_N: int, n_pairs: int,
                         stream: np.random.Generator) -> tuple:
    """Monte-Carlo ``E|X - Y|_1`` over coupled pairs: ``(mean, standard error)``."""
    X, Y = dirichlet_coupled_pair(a, b, denom_N, stream, n_pairs)
    dist = np.abs(X - Y).sum(axis=-1)
    return float(dist.mean()), float(dist.std(ddof=1) / math.sqrt(n_pairs))


def beta_tail_mass(eps: float, a: float, b: float) -> float:
    """``P(X < eps) + P(X > 1 - eps)`` under ``Beta(a, b)``."""
    return float(reg_inc_beta(eps, a, b) + 1.0 - reg_inc_beta(1.0 - eps, a, b))


__all__ = ["sample_gamma", "sample_log_gamma", "sample_beta", "sample_dirichlet",
           "TestReport", "anderson_darling", "anderson_darling_statistic", "ad_null",
           "tn_statistic", "tn_null", "tn_test", "bootstrap_quantiles",
           "wasserstein1_1d", "dirichlet_was_bound", "rationalize",
           "dirichlet_coupled_pair", "coupled_was_estimate", "beta_tail_mass",
           "beta_fn"]
