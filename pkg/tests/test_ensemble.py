import math
import os

import numpy as np
import pytest
from scipy import stats as sps

from mfreplicator.ensemble import (LIC, UIC, BetaInit, Ensemble, Fixed, empirical_mean,
                                   iter_ensemble, iter_replicas, make_ensemble, poc_experiment,
                                   sample_initial, simulate_ensemble, step_ensemble,
                                   write_snapshots)
from mfreplicator.rng import generator
from mfreplicator.sde import IntegratorConfig, simulate_single
from mfreplicator.simplex import ModelParams, PairwiseKernel, mean_skew_kernel
from mfreplicator.stats import sample_beta


def test_empirical_mean_examples(ps1):
    cfg = IntegratorConfig()
    ens = Ensemble(np.array([[1.0, 0.0]] * 4), ps1, cfg)
    assert empirical_mean(ens).tolist() == [1.0, 0.0]
    assert empirical_mean(np.array([[1.0, 0.0], [0.0, 1.0]])).tolist() == [0.5, 0.5]


def test_empirical_mean_clt_band():
    s = 0.5 / 0.95
    x = sample_beta(s, 1 - s, generator(1, "clt"), 10_000)
    X = np.stack([x, 1 - x], axis=1)
    var = s * (1 - s) / 2
    assert abs(empirical_mean(X)[0] - s) <= 3 * math.sqrt(var) / 100


# ----------------------------------------------------------- initial laws

def test_initial_laws():
    X = sample_initial(UIC(), 20_000, 2, 3)
    assert sps.kstest(X[:, 0], "uniform").statistic < 0.015
    L = sample_initial(LIC(), 5000, 2, 3)
    assert 0.2 <= L[:, 0].min() and L[:, 0].max() <= 0.4
    B = sample_initial(BetaInit(2.0, 5.0), 20_000, 2, 3)
    assert sps.kstest(B[:, 0], sps.beta(2, 5).cdf).statistic < 0.015
    U3 = sample_initial(UIC(), 20_000, 3, 3)
    np.testing.assert_allclose(U3.sum(axis=1), 1.0, atol=1e-12)
    assert sps.kstest(U3[:, 0], sps.beta(1, 2).cdf).statistic < 0.015


def test_initial_points_independent_of_N():
    a = sample_initial(UIC(), 10, 2, 5)
    b = sample_initial(UIC(), 1000, 2, 5)
    np.testing.assert_array_equal(a, b[:10])


def test_fixed_law_validation():
    X = sample_initial(Fixed(np.array([0.5, 0.5])), 4, 2, 0)
    assert X.shape == (4, 2)
    with pytest.raises(ValueError):
        sample_initial(Fixed(np.array([[0.5, 0.5]] * 3)), 4, 2, 0)
    with pytest.raises(ValueError):
        sample_initial(LIC(), 4, 3, 0)


# ----------------------------------------------------------------- stepping

def test_single_particle_matches_simulate_single(ps1):
    p = ps1.replace(delta=0.0)
    cfg = IntegratorConfig(seed=4)
    x0 = np.array([0.3, 0.7])
    tr = simulate_single(x0, p, None, 0.5, cfg)
    ens = Ensemble(x0[None, :], p, cfg)
    for _ in range(50):
        ens = step_ensemble(ens)
    np.testing.assert_array_equal(ens.particles[0], tr.states[-1])


def test_no_interaction_permutation(ps1):
    p = ps1.replace(delta=0.0)
    cfg = IntegratorConfig(seed=8)
    X0 = sample_initial(UIC(), 6, 2, 8)
    perm = np.array([3, 0, 5, 1, 4, 2])
    a = Ensemble(X0, p, cfg)
    b = Ensemble(X0[perm], p, cfg, ids=perm)
    for _ in range(20):
        a, b = step_ensemble(a), step_ensemble(b)
    np.testing.assert_array_equal(a.particles[perm], b.particles)


def test_deterministic_synchronised(ps1):
    p = ps1.replace(sigma=0.0)
    ens = Ensemble(np.full((10, 2), 0.5), p, IntegratorConfig())
    ens = step_ensemble(ens)
    assert np.ptp(ens.particles, axis=0).max() == 0.0
    # Pi_T[A~x] = 0 at the centre; the interaction gives h * x1 * (delta m1 x2) per step
    shift = 0.01 * 0.5 * (0.05 * 0.5 * 0.5)
    np.testing.assert_allclose(ens.particles[0] - 0.5, [shift, -shift], atol=1e-16)


def test_fixed_center_without_noise(ps1):
    p = ps1.replace(sigma=0.0, delta=0.0)
    snaps = simulate_ensemble(100, Fixed(np.array([0.5, 0.5])), p, 1.0, IntegratorConfig(),
                              snapshot_stride=10)
    for s in snaps:
        np.testing.assert_array_equal(s.mean, [0.5, 0.5])
        assert s.counts.tolist() == snaps[0].counts.tolist()


@pytest.mark.parametrize("N", [2, 17, 64])
def test_mean_skew_equals_pairwise_kernel(ps1, N):
    cfg = IntegratorConfig(seed=N)
    X0 = sample_initial(UIC(), N, 2, N)
    kern = ModelParams(ps1.payoff, ps1.sigma, 0.0, mean_skew_kernel(ps1.delta, ps1.skew))
    a = Ensemble(X0, ps1, cfg)
    b = Ensemble(X0, kern, cfg)
    for _ in range(25):
        a, b = step_ensemble(a), step_ensemble(b)
    assert np.abs(a.particles - b.particles).max() <= 1e-12


def test_pairwise_kernel_three_types():
    rng = np.random.default_rng(3)
    E = rng.normal(size=(3, 3))
    E = E - E.T
    A = rng.normal(size=(3, 3))
    from mfreplicator.simplex import MeanSkew
    ms = ModelParams(A, 0.5, 0.1, MeanSkew(E))
    pk = ModelParams(A, 0.5, 0.0, mean_skew_kernel(0.1, E))
    X0 = sample_initial(UIC(), 30, 3, 1)
    a, b = Ensemble(X0, ms, IntegratorConfig()), Ensemble(X0, pk, IntegratorConfig())
    for _ in range(10):
        a, b = step_ensemble(a), step_ensemble(b)
    assert np.abs(a.particles - b.particles).max() <= 1e-12


@pytest.mark.parametrize("scheme", ["direct", "log"])
def test_worker_count_invariance(ps2, scheme):
    cfg = IntegratorConfig(seed=12, scheme=scheme)
    runs = []
    for w in (1, 3, 8):
        X = None
        for _, X in iter_ensemble(500, UIC(), ps2, 0.5, cfg, stride=50, workers=w):
            pass
        runs.append(X)
    assert all(np.array_equal(runs[0], r) for r in runs[1:])


def test_replicas_match_tagged_ensembles(ps1):
    cfg = IntegratorConfig(seed=6)
    last = None
    for _, last in iter_replicas(3, 20, UIC(), ps1, 0.3, cfg, stride=30):
        pass
    for r in range(3):
        X = None
        for _, X in iter_ensemble(20, UIC(), ps1, 0.3, cfg, stride=30, tag=("replica", r)):
            pass
        np.testing.assert_array_equal(last[r], X)


def test_ensemble_stays_in_simplex(ps2):
    for t, X in iter_ensemble(2000, LIC(), ps2, 5.0, IntegratorConfig(seed=3), stride=50):
        assert X.min() >= 0
        np.testing.assert_allclose(X.sum(axis=1), 1.0, atol=1e-12)
        m = X.mean(axis=0)
        assert m.min() >= 0 and m.sum() == pytest.approx(1.0, abs=1e-12)


def test_write_snapshots(ps1, tmp_path):
    snaps = simulate_ensemble(50, UIC(), ps1, 0.2, IntegratorConfig(), snapshot_stride=10,
                              keep_samples=True)
    write_snapshots(snaps, tmp_path)
    files = sorted(os.listdir(tmp_path))
    assert "means.csv" in files and "hist_t0.csv" in files and "sample_t0.2.csv" in files
    means = np.loadtxt(tmp_path / "means.csv", delimiter=",", skiprows=1)
    assert means.shape == (3, 3)
    hist = np.loadtxt(tmp_path / "hist_t0.1.csv", delimiter=",", skiprows=1)
    assert hist.shape == (100, 3) and hist[:, 2].sum() == 50


# -------------------------------------------------------------------- chaos

def test_poc_without_interaction_is_exact(ps1):
    rep = poc_experiment([10, 20], 3, ps1.replace(delta=0.0), 0.5, IntegratorConfig(),
                         N_ref=200)
    assert all(r.mean_sup_sq_error == 0.0 for r in rep.rows)


def test_poc_synchronised_deterministic(ps1):
    p = ps1.replace(sigma=0.0)
    rep = poc_experiment([10, 20], 2, p, 1.0, IntegratorConfig(), N_ref=200,
                         law=Fixed(np.array([0.3, 0.7])))
    assert max(r.mean_sup_sq_error for r in rep.rows) < 1e-28


def test_poc_errors_decrease(ps1):
    rep = poc_experiment([20, 80, 320], 10, ps1, 2.0, IntegratorConfig(seed=1), N_ref=4000)
    errs = [r.mean_sup_sq_error for r in rep.rows]
    assert rep.slope < 0
    assert errs[-1] < errs[0]


def test_poc_validation(ps1):
    with pytest.raises(ValueError):
        poc_experiment([100, 50], 2, ps1, 1.0, IntegratorConfig(), N_ref=10_000)
    with pytest.raises(ValueError):
        poc_experiment([100], 2, ps1, 1.0, IntegratorConfig(), N_ref=500)


def test_make_ensemble_shapes(ps1):
    ens = make_ensemble(7, UIC(), ps1, IntegratorConfig())
    assert ens.N == 7 and ens.time == 0.0
    ens = step_ensemble(ens)
    assert ens.time == pytest.approx(0.01)
    with pytest.raises(ValueError):
        Ensemble(np.ones((3, 3)) / 3, ps1, IntegratorConfig())
    assert isinstance(PairwiseKernel(lambda x, y: x), PairwiseKernel)
