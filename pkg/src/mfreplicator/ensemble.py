"""The N-replicator mean-field system and the propagation-of-chaos experiment."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import IntegratorBlowup, SimplexError
from .rng import CounterStream
from .sde import IntegratorConfig, em_step, log_abundance_step, to_log
from .simplex import ModelParams, PairwiseKernel
from .special import beta_ppf

HIST_BINS = 100


# ---------------------------------------------------------------- initial laws

@dataclass(frozen=True)
class UIC:
    """Uniform on the simplex (first coordinate ~ U(0, 1) when d = 2)."""


@dataclass(frozen=True)
class LIC:
    """Two types only: first coordinate ~ U(lo, hi)."""

    lo: float = 0.2
    hi: float = 0.4


@dataclass(frozen=True)
class BetaInit:
    a: float
    b: float


@dataclass(frozen=True)
class Fixed:
    """Explicit starting points: one point for all particles, or one per particle."""

    points: np.ndarray


def sample_initial(law, N: int, d: int, seed: int, replicas=None,
                   tag: tuple = ()) -> np.ndarray:
    """Draw ``N`` starting points, shape ``(N, d)`` or ``(R, N, d)``.

    Draws are keyed by particle id on the ``init`` sub-stream, so the
    point given to particle ``i`` does not depend on ``N``.
    """
    ids = np.arange(N)
    stream = CounterStream(seed, "init", *tag, replicas=replicas)
    shape_prefix = (N,) if replicas is None else (len(replicas), N)
    if isinstance(law, Fixed):
        pts = np.asarray(law.points, dtype=float)
        if pts.ndim == 1:
            pts = np.broadcast_to(pts, (N, pts.size))
        if pts.shape != (N, d):
            raise ValueError(f"fixed points have shape {pts.shape}, expected {(N, d)}")
        if np.any(pts < 0) or np.any(np.abs(pts.sum(axis=1) - 1) > 1e-9):
            raise SimplexError("fixed initial points must lie in the simplex")
        return np.broadcast_to(pts, shape_prefix + (d,)).copy()
    if isinstance(law, UIC):
        if d == 2:
            u = stream.uniform(ids, 0, 1)[..., 0]
            return np.stack([u, 1 - u], axis=-1)
        e = -np.log(stream.uniform(ids, 0, d))
        return e / e.sum(axis=-1, keepdims=True)
    if d != 2:
        raise ValueError(f"{type(law).__name__} is defined for d = 2 only")
    if isinstance(law, LIC):
        u = stream.uniform(ids, 0, 1)[..., 0]
        x1 = law.lo + (law.hi - law.lo) * u
    elif isinstance(law, BetaInit):
        u = stream.uniform(ids, 0, 1)[..., 0]
        x1 = beta_ppf(u, law.a, law.b)
    else:
        raise TypeError(f"unknown initial law {law!r}")
    return np.stack([x1, 1 - x1], axis=-1)


# ------------------------------------------------------------------- ensemble

@dataclass
class Ensemble:
    particles: np.ndarray
    params: ModelParams
    config: IntegratorConfig
    step_index: int = 0
    ids: Optional[np.ndarray] = None
    log_state: Optional[np.ndarray] = field(default=None, repr=False)
    tag: tuple = ()

    def __post_init__(self):
        X = np.asarray(self.particles, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError("particles must have shape (N, d) with N >= 1")
        if X.shape[1] != self.params.d:
            raise ValueError("particle dimension does not match the payoff matrix")
        self.particles = X
        if self.ids is None:
            self.ids = np.arange(X.shape[0])
        if self.config.scheme == "log" and self.log_state is None:
            self.log_state = to_log(X)

    @property
    def N(self) -> int:
        return self.particles.shape[0]

    @property
    def time(self) -> float:
        return self.step_index * self.config.h


def empirical_mean(ensemble) -> np.ndarray:
    X = ensemble.particles if isinstance(ensemble, Ensemble) else np.asarray(ensemble)
    return X.mean(axis=-2)


def _chunks(n: int, workers: int):
    bounds = np.linspace(0, n, max(1, min(workers, n)) + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _advance(X, ylog, params, config, stream, ids, step, mean, upsilon):
    dW = math.sqrt(config.h) * stream.normal(ids, step, X.shape[-1])
    if config.scheme == "direct":
        return em_step(X, params, mean, dW, config, upsilon=upsilon, step=step), None
    ylog, Xn = log_abundance_step(ylog, params, mean, dW, config,
                                  upsilon=upsilon, step=step)
    return Xn, ylog


def step_ensemble(ensemble: Ensemble, workers: int = 1) -> Ensemble:
    """Advance every particle by one step.

    The empirical mean (or the pairwise interaction average) is computed
    once from the current state; the particle update then runs in
    ``workers`` chunks.  Each particle draws its noise from the counter
    stream keyed by its id, so the result does not depend on ``workers``.
    """
    X = ensemble.particles
    params, config = ensemble.params, ensemble.config
    mean = X.mean(axis=0)
    upsilon = None
    if isinstance(params.interaction, PairwiseKernel):
        upsilon = params.interaction.average(X, X)
    stream = CounterStream(config.seed, "noise", *ensemble.tag)
    step = ensemble.step_index
    Xn = np.empty_like(X)
    Yn = None if ensemble.log_state is None else np.empty_like(X)

    def work(sl):
        ups = None if upsilon is None else upsilon[sl]
        ylog = None if Yn is None else ensemble.log_state[sl]
        try:
            xs, ys = _advance(X[sl], ylog, params, config, stream,
                              ensemble.ids[sl], step, mean, ups)
        except IntegratorBlowup as exc:
            pid = None if exc.particle is None else int(ensemble.ids[sl][exc.particle])
            raise IntegratorBlowup(step, pid) from None
        Xn[sl] = xs
        if Yn is not None:
            Yn[sl] = ys

    slices = _chunks(X.shape[0], workers)
    if len(slices) == 1:
        work(slices[0])
    else:
        with ThreadPoolExecutor(max_workers=len(slices)) as pool:
            list(pool.map(work, slices))
    return replace(ensemble, particles=Xn, step_index=step + 1, log_state=Yn)


def make_ensemble(N: int, law, params: ModelParams, config: IntegratorConfig,
                  tag: tuple = ()) -> Ensemble:
    X0 = sample_initial(law, N, params.d, config.seed, tag=tag)
    return Ensemble(X0, params, config, tag=tuple(tag))


def iter_ensemble(N: int, law, params: ModelParams, T: float,
                  config: IntegratorConfig, stride: int = 1,
                  workers: int = 1, tag: tuple = ()) -> Iterator[tuple]:
    """Yield ``(t, particles)`` at step 0 and every ``stride`` steps up to ``T``."""
    if stride < 1:
        raise ValueError("snapshot stride must be >= 1")
    n = config.n_steps(T)
    ens = make_ensemble(N, law, params, config, tag)
    yield 0.0, ens.particles
    for k in range(n):
        ens = step_ensemble(ens, workers)
        if (k + 1) % stride == 0 or k + 1 == n:
            yield ens.time, ens.particles


@dataclass
class EmpiricalSnapshot:
    time: float
    mean: np.ndarray
    edges: np.ndarray
    counts: np.ndarray
    sample: Optional[np.ndarray] = None


def snapshot(t: float, X: np.ndarray, bins: int = HIST_BINS,
             keep_sample: bool = False) -> EmpiricalSnapshot:
    counts, edges = np.histogram(X[:, 0], bins=bins, range=(0.0, 1.0))
    return EmpiricalSnapshot(t, X.mean(axis=0), edges, counts,
                             X.copy() if keep_sample else None)


def simulate_ensemble(N: int, law, params: ModelParams, T: float,
                      config: IntegratorConfig, snapshot_stride: int = 100,
                      keep_samples: bool = False, bins: int = HIST_BINS,
                      workers: int = 1) -> list:
    return [snapshot(t, X, bins, keep_samples)
            for t, X in iter_ensemble(N, law, params, T, config,
                                      snapshot_stride, workers)]


def _tfmt(t: float) -> str:
    return f"{t:.6g}"


def write_snapshots(snapshots: Sequence[EmpiricalSnapshot], out_dir) -> None:
    """Write ``means.csv``, ``hist_t<t>.csv`` and optional ``sample_t<t>.csv``."""
    os.makedirs(out_dir, exist_ok=True)
    d = snapshots[0].mean.size
    with open(os.path.join(out_dir, "means.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"mean_{i + 1}" for i in range(d)])
        for s in snapshots:
            w.writerow([f"{s.time:.17g}"] + [f"{v:.17g}" for v in s.mean])
    for s in snapshots:
        with open(os.path.join(out_dir, f"hist_t{_tfmt(s.time)}.csv"), "w",
                  newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_lo", "bin_hi", "count"])
            for lo, hi, c in zip(s.edges[:-1], s.edges[1:], s.counts):
                w.writerow([f"{lo:.17g}", f"{hi:.17g}", int(c)])
        if s.sample is not None:
            with open(os.path.join(out_dir, f"sample_t{_tfmt(s.time)}.csv"), "w",
                      newline="") as fh:
                w = csv.writer(fh)
                w.writerow([f"x{i + 1}" for i in range(d)])
                for row in s.sample:
                    w.writerow([f"{v:.17g}" for v in row])


# ------------------------------------------------------------ batched replicas

def iter_replicas(R: int, N: int, law, params: ModelParams, T: float,
                  config: IntegratorConfig, stride: int = 1,
                  tag: str = "replica") -> Iterator[tuple]:
    """Run ``R`` independent ``N``-particle systems side by side.

    Yields ``(t, X)`` with ``X`` of shape ``(R, N, d)``.  Replica ``r``
    uses streams keyed by ``(seed, tag, r)``.
    """
    if isinstance(params.interaction, PairwiseKernel):
        raise TypeError("batched replicas support the mean-skew interaction only")
    reps = range(R)
    X = sample_initial(law, N, params.d, config.seed, replicas=reps, tag=(tag,))
    stream = CounterStream(config.seed, "noise", tag, replicas=reps)
    ids = np.arange(N)
    ylog = to_log(X) if config.scheme == "log" else None
    n = config.n_steps(T)
    yield 0.0, X
    for k in range(n):
        mean = X.mean(axis=-2, keepdims=True)
        X, ylog = _advance(X, ylog, params, config, stream, ids, k, mean, None)
        if (k + 1) % stride == 0 or k + 1 == n:
            yield (k + 1) * config.h, X


# ------------------------------------------------------ propagation of chaos

@dataclass
class PocRow:
    N: int
    M: int
    mean_sup_sq_error: float
    std_error: float


@dataclass
class PocReport:
    rows: list
    slope: float
    intercept: float
    ref_times: np.ndarray = field(repr=False)
    ref_mean: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"rows": [vars(r) for r in self.rows], "slope": self.slope,
                "intercept": self.intercept}


def reference_mean_curve(N_ref: int, law, params: ModelParams, T: float,
                         config: IntegratorConfig) -> tuple:
    """Mean curve of one independent size-``N_ref`` run, at every step."""
    times, means = [], []
    for t, X in iter_ensemble(N_ref, law, params, T, config, tag=("poc-ref",)):
        times.append(t)
        means.append(X.mean(axis=0))
    return np.array(times), np.array(means)


def interpolated(times: np.ndarray, means: np.ndarray):
    """Piecewise-linear ``t -> mean`` through the recorded curve."""
    def curve(t):
        return np.array([np.interp(t, times, means[:, j]) for j in range(means.shape[1])])
    return curve


def poc_experiment(N_list, M: int, params: ModelParams, T: float,
                   config: IntegratorConfig, N_ref: int = 100_000,
                   law=UIC()) -> PocReport:
    """Coupled N-system versus frozen-curve copies, per ``N`` in ``N_list``.

    For each replication the interacting system and ``N`` copies driven by
    the estimated limit mean share initial points and Brownian increments;
    the recorded error is the particle average of ``sup_t |X - Xi|^2``.
    """
    N_list = [int(n) for n in N_list]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be strictly increasing")
    if N_ref < 10 * max(N_list):
        raise ValueError(f"N_ref={N_ref} must be at least 10 * max(N_list)")
    if config.scheme != "direct":
        raise ValueError("the coupling experiment uses the direct scheme")
    ref_t, ref_m = reference_mean_curve(N_ref, law, params, T, config)
    n = config.n_steps(T)
    sqrt_h = math.sqrt(config.h)
    rows = []
    for N in N_list:
        reps = range(M)
        X = sample_initial(law, N, params.d, config.seed, replicas=reps,
                           tag=("poc", N))
        Xi = X.copy()
        stream = CounterStream(config.seed, "noise", "poc", N, replicas=reps)
        ids = np.arange(N)
        sup2 = np.zeros(X.shape[:-1])
        for k in range(n):
            dW = sqrt_h * stream.normal(ids, k, params.d)
            mean = X.mean(axis=-2, keepdims=True)
            X = em_step(X, params, mean, dW, config, step=k)
            Xi = em_step(Xi, params, ref_m[k], dW, config, step=k)
            np.maximum(sup2, np.sum((X - Xi) ** 2, axis=-1), out=sup2)
        per_rep = sup2.mean(axis=-1)
        se = per_rep.std(ddof=1) / math.sqrt(M) if M > 1 else float("nan")
        rows.append(PocRow(N, M, float(per_rep.mean()), float(se)))
    errs = np.array([r.mean_sup_sq_error for r in rows])
    if len(rows) >= 2 and np.all(errs > 0):
        slope, intercept = np.polyfit(np.log(N_list), np.log(errs), 1)
    else:
        slope = intercept = float("nan")
    return PocReport(rows, float(slope), float(intercept), ref_t, ref_m)
