import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special, stats as sst

from atlasfluct import stats
from atlasfluct.errors import StatisticsError


def uniform_cdf(x):
    return np.clip(x, 0, 1)


def test_ks_null_holds():
    x = np.random.default_rng(1).normal(size=2000)
    assert stats.ks_test(x, special.ndtr).p_value >= 0.01


def test_ks_detects_location_shift():
    x = np.random.default_rng(2).normal(size=2000)
    r = stats.ks_test(x, lambda v: special.ndtr(v - 1))
    assert r.p_value < 1e-6
    assert r.statistic == pytest.approx(special.ndtr(0.5) - special.ndtr(-0.5), abs=0.04)


def test_ks_single_point_statistic_and_small_n():
    assert stats.ks_statistic([0.5], uniform_cdf) == 0.5
    with pytest.raises(StatisticsError):
        stats.ks_test([0.1] * 9, uniform_cdf)
    with pytest.raises(StatisticsError):
        stats.ks_statistic([0.1, np.nan], uniform_cdf)
    with pytest.raises(StatisticsError):
        stats.ks_statistic([0.1, 0.7], lambda v: 2 * v)


def test_ks_statistic_matches_scipy():
    x = np.random.default_rng(3).uniform(size=500)
    assert stats.ks_statistic(x, uniform_cdf) == pytest.approx(sst.kstest(x, "uniform").statistic,
                                                              rel=1e-12)


@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_kolmogorov_tail_is_monotone(l1, l2):
    lo, hi = min(l1, l2), max(l1, l2)
    assert stats.kolmogorov_sf(hi) <= stats.kolmogorov_sf(lo)
    assert 0 <= stats.kolmogorov_sf(lo) <= 1


def test_kolmogorov_tail_against_series():
    lam = 1.2
    series = 2 * sum((-1) ** (k - 1) * np.exp(-2 * k * k * lam * lam) for k in range(1, 101))
    assert stats.kolmogorov_sf(lam) == pytest.approx(series, rel=1e-12)


def test_ks_p_values_uniform_under_null():
    rng = np.random.default_rng(4)
    p = np.array([stats.ks_test(rng.uniform(size=200), uniform_cdf).p_value for _ in range(200)])
    assert 0.01 <= np.mean(p < 0.05) <= 0.12


def test_chi_square_poisson_examples():
    rng = np.random.default_rng(5)
    assert stats.chi_square_poisson(rng.poisson(5.0, 10000), 5.0) >= 0.01
    assert stats.chi_square_poisson(np.zeros(100, dtype=int), 5.0) < 1e-10
    with pytest.raises(StatisticsError):
        stats.chi_square_poisson(rng.poisson(0.1, 30), 0.1)
    with pytest.raises(StatisticsError):
        stats.chi_square_poisson([1, -1, 2], 1.0)
    with pytest.raises(StatisticsError):
        stats.chi_square_poisson([1, 2], 0.0)


def test_poisson_bins_cover_all_outcomes():
    bins = stats.poisson_bins(3.0, 1000)
    assert bins[0][0] == 0 and bins[-1][1] == np.inf
    for (l1, h1), (l2, _) in zip(bins[:-1], bins[1:]):
        assert l2 == h1 + 1


def test_batch_means_examples():
    m, h = stats.batch_mean_ci(np.full(1000, 2.5), 20)
    assert m == 2.5 and h == 0
    rng = np.random.default_rng(6)
    cover = 0
    for _ in range(100):
        m, h = stats.batch_mean_ci(rng.normal(1.0, 1.0, 10000), 20)
        cover += abs(m - 1.0) <= h
    assert cover >= 95
    with pytest.raises(StatisticsError):
        stats.batch_mean_ci(np.zeros(100), 20)


def test_batch_means_widen_for_correlated_series():
    rng = np.random.default_rng(7)
    e = rng.normal(size=20000)
    ar = np.empty_like(e)
    ar[0] = e[0]
    for i in range(1, e.size):
        ar[i] = 0.99 * ar[i - 1] + np.sqrt(1 - 0.99 ** 2) * e[i]
    _, h_ar = stats.batch_mean_ci(ar, 20)
    _, h_iid = stats.batch_mean_ci(e, 20)
    assert h_ar > h_iid


def test_batch_means_columnwise():
    x = np.column_stack([np.zeros(400), np.ones(400)])
    m, h = stats.batch_mean_ci(x, 20)
    assert m.tolist() == [0.0, 1.0] and h.tolist() == [0.0, 0.0]
