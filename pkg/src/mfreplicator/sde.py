"""Euler-Maruyama stepping for the simplex-valued replicator SDE.

Two schemes are available:

``direct``
    Plain Euler-Maruyama on the proportions, followed by the boundary
    policy (clamp coordinates below ``floor`` and renormalise).
``log``
    Euler-Maruyama on log-abundances ``log y`` with fitness
    ``A~x + interaction + sigma^2 x``, mapped back through ``y / |y|_1``.
    Positivity holds by construction.

All stepping functions are vectorised over leading axes of ``x``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import IntegratorBlowup
from .rng import CounterStream
from .simplex import ModelParams, PairwiseKernel, SimplexPoint, project_tangent

SCHEMES = ("direct", "log")


@dataclass(frozen=True)
class IntegratorConfig:
    h: float = 0.01
    scheme: str = "direct"
    floor: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("time step h must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if not 0 < self.floor <= 1e-6:
            raise ValueError("floor must lie in (0, 1e-6]")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    def n_steps(self, T: float) -> int:
        if T < self.h * (1 - 1e-12):
            raise ValueError(f"horizon T={T} shorter than one step h={self.h}")
        return int(math.ceil(T / self.h - 1e-9))


def _interaction_fitness(x, params: ModelParams, mean, upsilon):
    if isinstance(params.interaction, PairwiseKernel):
        if upsilon is None:
            raise ValueError("pairwise kernel needs the averaged interaction term")
        return upsilon
    if params.delta == 0:
        return None
    if mean is None:
        raise ValueError("delta > 0 requires the (empirical or frozen) mean")
    mean = np.asarray(mean, dtype=float)
    return params.delta * mean[..., :1] * (x @ params.skew.T)


def fitness(x, params: ModelParams, mean=None, upsilon=None) -> np.ndarray:
    """``A~x`` plus the interaction term, before tangent projection."""
    x = np.asarray(x, dtype=float)
    F = x @ params.a_tilde.T
    extra = _interaction_fitness(x, params, mean, upsilon)
    return F if extra is None else F + extra


def drift(x, params: ModelParams, mean=None, upsilon=None) -> np.ndarray:
    """Projected drift ``Pi_T[A~x] + Pi_T[interaction]``.

    For :class:`MeanSkew` pass the population mean ``mean`` (only its first
    coordinate matters); for :class:`PairwiseKernel` pass ``upsilon``, the
    interaction already averaged over co-particles.
    """
    x = np.asarray(x, dtype=float)
    return project_tangent(fitness(x, params, mean, upsilon), x)


def diffusion_increment(x, sigma: float, dW) -> np.ndarray:
    """``sigma * (x * dW - <x, dW> x)``."""
    x = np.asarray(x, dtype=float)
    dW = np.asarray(dW, dtype=float)
    return sigma * (x * dW - np.sum(x * dW, axis=-1, keepdims=True) * x)


def _check_finite(x, step):
    if not np.all(np.isfinite(x)):
        bad = np.argwhere(~np.all(np.isfinite(x), axis=-1))
        particle = int(bad[0][-1]) if bad.size and x.ndim > 1 else None
        raise IntegratorBlowup(step, particle)


def apply_boundary(x, floor: float) -> np.ndarray:
    x = np.maximum(x, floor)
    return x / np.sum(x, axis=-1, keepdims=True)


def em_step(x, params: ModelParams, mean, dW, config: IntegratorConfig,
            upsilon=None, step: int = 0) -> np.ndarray:
    """One direct Euler-Maruyama step followed by the boundary policy."""
    x = np.asarray(x, dtype=float)
    raw = x + drift(x, params, mean, upsilon) * config.h \
        + diffusion_increment(x, params.sigma, dW)
    _check_finite(raw, step)
    return apply_boundary(raw, config.floor)


def _softmax(y):
    z = np.exp(y - np.max(y, axis=-1, keepdims=True))
    return z / np.sum(z, axis=-1, keepdims=True)


def log_abundance_step(y_log, params: ModelParams, mean, dW,
                       config: IntegratorConfig, upsilon=None, step: int = 0):
    """One Euler-Maruyama step for log-abundances.

    Returns ``(y_log_new, x_new)``; ``y_log_new`` is shifted so that its
    maximum is zero, which leaves the projected point unchanged.
    """
    y_log = np.asarray(y_log, dtype=float)
    x = _softmax(y_log)
    s2 = params.sigma ** 2
    growth = fitness(x, params, mean, upsilon) + s2 * x - 0.5 * s2
    y_new = y_log + growth * config.h + params.sigma * np.asarray(dW, dtype=float)
    _check_finite(y_new, step)
    y_new = y_new - np.max(y_new, axis=-1, keepdims=True)
    return y_new, _softmax(y_new)


def to_log(x, floor: float = 1e-300) -> np.ndarray:
    return np.log(np.maximum(np.asarray(x, dtype=float), floor))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    stride: int = 1

    def __len__(self):
        return len(self.times)

    def point(self, k: int) -> SimplexPoint:
        return SimplexPoint(self.states[k])

    def to_csv(self, path) -> None:
        d = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i + 1}" for i in range(d)])
            for t, x in zip(self.times, self.states):
                w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in x])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(times=data[:, 0], states=data[:, 1:])


MeanSpec = Union[None, np.ndarray, Callable[[float], np.ndarray]]


def noise_stream(seed: int, replicas=None) -> CounterStream:
    return CounterStream(seed, "noise", replicas=replicas)


def simulate_single(x0, params: ModelParams, frozen_mean: MeanSpec, T: float,
                    config: IntegratorConfig, stride: int = 1,
                    particle: int = 0) -> Trajectory:
    """Integrate one replicator with the measure frozen.

    ``frozen_mean`` is a fixed mean vector, a callable ``t -> mean``, or
    ``None`` (allowed when ``delta == 0``).  Noise comes from the same
    counter stream an ensemble with this seed would give ``particle``.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if isinstance(params.interaction, PairwiseKernel):
        raise TypeError("simulate_single supports the mean-skew interaction only")
    x = np.array(SimplexPoint(x0).coords)
    n = config.n_steps(T)
    stream = noise_stream(config.seed)
    ids = np.array([particle])
    ylog = to_log(x) if config.scheme == "log" else None
    times, states = [0.0], [x.copy()]
    sqrt_h = math.sqrt(config.h)
    for k in range(n):
        t = k * config.h
        m = frozen_mean(t) if callable(frozen_mean) else frozen_mean
        dW = sqrt_h * stream.normal(ids, k, x.size)[0]
        if config.scheme == "direct":
            x = em_step(x, params, m, dW, config, step=k)
        else:
            ylog, x = log_abundance_step(ylog, params, m, dW, config, step=k)
        if (k + 1) % stride == 0 or k + 1 == n:
            times.append((k + 1) * config.h)
            states.append(x.copy())
    return Trajectory(np.array(times), np.array(states), stride)
