import math

import numpy as np
import pytest
from scipy import integrate, stats as sst

from mfreplicator.rng import generator
from mfreplicator.special import beta_fn, beta_ppf, reg_inc_beta
from mfreplicator.stats import (ad_null, ad_statistic_uniform, anderson_darling,
                                anderson_darling_statistic, beta_tail_mass,
                                bootstrap_quantiles, coupled_was_estimate,
                                dirichlet_coupled_pair, dirichlet_was_bound, rationalize,
                                sample_beta, sample_dirichlet, sample_gamma, sample_log_gamma,
                                tn_null, tn_statistic, tn_test, wasserstein1_1d)

S1 = 0.5 / 0.95


def _tn_quadrature(y, a, b):
    y = np.sort(np.asarray(y, dtype=float))
    c = (a + b) * y - a
    g = lambda t: t ** a * (1 - t) ** b / beta_fn(a, b)
    knots = np.concatenate([[0.0], y, [1.0]])
    total = 0.0
    for k in range(knots.size - 1):
        level = c[k:].sum() / y.size
        val, _ = integrate.quad(lambda t: (level - g(t)) ** 2, knots[k], knots[k + 1],
                                epsabs=1e-14, epsrel=1e-13)
        total += val
    return y.size * total


# ------------------------------------------------------------------ samplers

def test_beta_mean():
    a, b = 0.5263, 0.4737
    x = sample_beta(a, b, generator(1, "beta"), 10 ** 6)
    sd = math.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)))
    assert abs(x.mean() - a / (a + b)) <= 4 * sd / 1000
    assert np.all((x >= 0) & (x <= 1))


def test_dirichlet_uniform_marginal():
    x = sample_dirichlet([1.0, 1.0], generator(2, "dir"), 10 ** 5)
    np.testing.assert_allclose(x.sum(axis=1), 1.0, atol=1e-15)
    assert sst.kstest(x[:, 0], "uniform").statistic < 0.01


def test_dirichlet_means_three_types():
    alpha = np.array([0.2, 0.5, 1.3])
    x = sample_dirichlet(alpha, generator(3, "dir"), 10 ** 5)
    m = alpha / alpha.sum()
    var = m * (1 - m) / (alpha.sum() + 1)
    assert np.all(np.abs(x.mean(axis=0) - m) <= 4 * np.sqrt(var / 1e5))
    assert sample_dirichlet(alpha, generator(3, "one")).shape == (3,)


def test_gamma_moments():
    k = 0.5263
    g = sample_gamma(k, generator(4, "gamma"), 10 ** 6)
    n = g.size
    assert abs(g.mean() - k) <= 4 * math.sqrt(k / n)
    # Var of the sample variance for Gamma(k): (mu4 - k^2) / n with mu4 = 3k^2 + 6k
    assert abs(g.var() - k) <= 4 * math.sqrt((2 * k ** 2 + 6 * k) / n)


def test_tiny_shape_stays_finite():
    lg = sample_log_gamma(1e-3, generator(5, "tiny"), 10 ** 4)
    assert np.all(np.isfinite(lg))
    x = sample_beta(1e-3, 1e-3, generator(5, "tinyb"), 10 ** 4)
    assert np.all(np.isfinite(x))
    with pytest.raises(ValueError):
        sample_gamma(0.0, generator(5))


def test_samplers_reproducible():
    a = sample_beta(0.6, 0.4, generator(7, "x"), 100)
    b = sample_beta(0.6, 0.4, generator(7, "x"), 100)
    np.testing.assert_array_equal(a, b)


# ----------------------------------------------------------- Anderson-Darling

def _ad_naive(u):
    u = sorted(u)
    n = len(u)
    s = sum((2 * j - 1) * (math.log(u[j - 1]) + math.log(1 - u[n - j])) for j in range(1, n + 1))
    return -n - s / n


def test_ad_formula_matches_naive():
    u = generator(8, "u").random(57)
    assert ad_statistic_uniform(u) == pytest.approx(_ad_naive(u), rel=1e-12)


def test_ad_exact_quantiles_not_rejected():
    n = 200
    u = (np.arange(1, n + 1) - 0.5) / n
    x = beta_ppf(u, S1, 1 - S1)
    rep = anderson_darling(x, S1, 1 - S1, B=1000, seed=2024)
    assert rep.statistic < rep.quantiles[0.99]
    assert not rep.reject[0.99]


def test_ad_power_against_uniform():
    x = generator(9, "unif").random(10 ** 4)
    rep = anderson_darling(x, S1, 1 - S1, B=1000, seed=2024)
    assert rep.reject[0.99]
    assert rep.p_value <= 1 / 1001 + 1e-15


def test_ad_pit_invariance():
    x = sample_beta(0.6, 0.4, generator(10, "pit"), 500)
    u = reg_inc_beta(x, 0.6, 0.4)
    assert anderson_darling_statistic(x, 0.6, 0.4) == pytest.approx(ad_statistic_uniform(u), abs=1e-12)


def test_ad_clamps_degenerate_values():
    assert math.isfinite(ad_statistic_uniform([0.0, 0.0, 1.0, 1.0, 0.5, 0.2, 0.3, 0.9]))


def test_ad_null_calibration():
    null = ad_null(50, 2000, seed=11)
    # asymptotic 1% point of A^2 is 3.857
    assert np.quantile(null, 0.99) == pytest.approx(3.857, rel=0.15)
    np.testing.assert_array_equal(null, ad_null(50, 2000, seed=11))


def test_ad_report_fields():
    rep = anderson_darling(sample_beta(0.6, 0.4, generator(12), 100), 0.6, 0.4, B=1000)
    d = rep.to_dict()
    assert list(d["quantiles"]) == ["0.90", "0.95", "0.99"]
    q = list(rep.quantiles.values())
    assert q == sorted(q)
    with pytest.raises(ValueError):
        anderson_darling([0.1] * 7, 0.6, 0.4)


# ------------------------------------------------------------------------ T_n

def test_tn_single_point_closed_form():
    a, b = S1, 1 - S1
    g2 = beta_fn(2 * a + 1, 2 * b + 1) / beta_fn(a, b) ** 2
    assert tn_statistic([a], a, b) == pytest.approx(g2, abs=1e-10)
    assert tn_statistic([a], a, b) == pytest.approx(_tn_quadrature([a], a, b), abs=1e-10)


@pytest.mark.parametrize("a,b,n", [(S1, 1 - S1, 25), (0.6, 0.9, 40), (2.0, 3.0, 10)])
def test_tn_matches_quadrature(a, b, n):
    y = sample_beta(a, b, generator(13, "tn", n), n)
    assert tn_statistic(y, a, b) == pytest.approx(_tn_quadrature(y, a, b), abs=1e-10)


def test_tn_nonnegative_and_permutation_invariant():
    rng = np.random.default_rng(14)
    for _ in range(50):
        y = rng.random(rng.integers(1, 60))
        t = tn_statistic(y, 0.6, 0.4)
        assert t >= 0
        assert tn_statistic(rng.permutation(y), 0.6, 0.4) == pytest.approx(t, abs=1e-13)


def test_tn_null_sample_below_quantile():
    a, b = S1, 1 - S1
    null = tn_null(1000, a, b, B=300, seed=15)
    assert np.mean(null < 0.1056) >= 0.85


def test_bootstrap_properties():
    q = bootstrap_quantiles(100, 0.6, 0.4, B=1000, seed=16)
    vals = [q[0.9], q[0.95], q[0.99]]
    assert vals[0] < vals[1] < vals[2]
    assert q == bootstrap_quantiles(100, 0.6, 0.4, B=1000, seed=16)
    assert q == bootstrap_quantiles(100, 0.6, 0.4, B=1000, seed=16, workers=4)
    assert q != bootstrap_quantiles(100, 0.6, 0.4, B=1000, seed=17)
    with pytest.raises(ValueError):
        bootstrap_quantiles(100, 0.6, 0.4, B=999)


def test_tn_test_report():
    y = sample_beta(0.6, 0.4, generator(18), 100)
    rep = tn_test(y, 0.6, 0.4, B=1000, seed=1)
    assert rep.method == "TnL2" and rep.B == 1000 and rep.n == 100
    assert 0 < rep.p_value <= 1


# ---------------------------------------------------------------- Wasserstein

def test_wasserstein_trivial():
    x = generator(19).random(100)
    assert wasserstein1_1d(x, x) == 0.0
    assert wasserstein1_1d(x, x + 0.3) == pytest.approx(0.3, abs=1e-14)
    with pytest.raises(ValueError):
        wasserstein1_1d([], x)


def test_wasserstein_unequal_sizes_scipy():
    x = generator(20, "x").random(137)
    y = generator(20, "y").normal(size=311)
    assert wasserstein1_1d(x, y) == pytest.approx(sst.wasserstein_distance(x, y), abs=1e-12)


def test_wasserstein_quantile_oracle():
    x = sample_beta(0.55, 0.45, generator(21, "x"), 10 ** 5)
    y = sample_beta(0.45, 0.55, generator(21, "y"), 10 ** 5)
    u = (np.arange(20_000) + 0.5) / 20_000
    oracle = np.mean(np.abs(beta_ppf(u, 0.55, 0.45) - beta_ppf(u, 0.45, 0.55)))
    assert abs(wasserstein1_1d(x, y) - oracle) <= 1e-3


# ---------------------------------------------------- Dirichlet Wasserstein

def test_was_bound_examples():
    assert dirichlet_was_bound([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert dirichlet_was_bound([0.6, 0.4], [0.5, 0.5]) == pytest.approx(0.2)
    assert dirichlet_was_bound([0.5, 0.3, 0.2], [0.4, 0.4, 0.2]) == pytest.approx(0.6)
    with pytest.raises(ValueError):
        dirichlet_was_bound([0.6, 0.5], [0.5, 0.5])


def test_rationalize():
    m = rationalize([0.6, 0.4], 100)
    assert m.tolist() == [60, 40]
    assert rationalize([0.333, 0.333, 0.334], 10).sum() == 10
    with pytest.raises(ValueError, match="invalid rationalization"):
        rationalize([0.999, 0.001], 100)


def test_coupling_identical_parameters():
    X, Y = dirichlet_coupled_pair([0.2, 0.3, 0.5], [0.2, 0.3, 0.5], 100, generator(22), 1000)
    np.testing.assert_array_equal(X, Y)


def test_coupling_respects_bound():
    mean, se = coupled_was_estimate([0.6, 0.4], [0.5, 0.5], 100, 10 ** 5, generator(23))
    assert mean <= 0.2 + 3 * se


def test_coupling_marginal():
    X, Y = dirichlet_coupled_pair([0.6, 0.4], [0.5, 0.5], 100, generator(24), 10 ** 5)
    rep = anderson_darling(X[:, 0], 0.6, 0.4, B=1000, seed=24)
    assert not rep.reject[0.99]
    assert not anderson_darling(Y[:, 0], 0.5, 0.5, B=1000, seed=25).reject[0.99]


def test_coupling_random_pairs_small():
    rng = np.random.default_rng(26)
    for d in (2, 3, 5):
        for _ in range(5):
            a = rng.dirichlet(np.ones(d))
            b = rng.dirichlet(np.ones(d))
            try:
                mean, se = coupled_was_estimate(a, b, 10 ** 4, 20_000, generator(26, d))
            except ValueError:
                continue
            assert mean <= dirichlet_was_bound(a, b) + 3 * se


def test_beta_tail_mass():
    assert beta_tail_mass(0.1, 1.0, 1.0) == pytest.approx(0.2)
    assert beta_tail_mass(0.01, 0.6, 0.4) == pytest.approx(
        sst.beta.cdf(0.01, 0.6, 0.4) + sst.beta.sf(0.99, 0.6, 0.4), abs=1e-12)


def test_coupling_two_types_attains_bound():
    # for d = 2 the coupled distance is 2 G / total with G ~ Gamma(|m1 - n1| / N),
    # whose mean is exactly the bound
    a, b = np.array([0.6, 0.4]), np.array([0.45, 0.55])
    X, Y = dirichlet_coupled_pair(a, b, 100, generator(27), 200_000)
    dist = np.abs(X - Y).sum(axis=1)
    se = dist.std(ddof=1) / math.sqrt(dist.size)
    assert abs(dist.mean() - dirichlet_was_bound(a, b)) <= 4 * se
