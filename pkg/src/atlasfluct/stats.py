"""Goodness-of-fit and Monte Carlo inference helpers."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats as _st

from .errors import StatisticsError


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float
    n: int

    def passed(self, alpha: float = 0.01) -> bool:
        return self.p_value >= alpha


def ks_statistic(samples, cdf) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise StatisticsError("no samples")
    if not np.all(np.isfinite(x)):
        raise StatisticsError("non-finite samples")
    f = np.asarray(cdf(x), dtype=float)
    if np.any(f < -1e-12) or np.any(f > 1 + 1e-12) or np.any(np.diff(f) < -1e-12):
        raise StatisticsError("cdf must be nondecreasing with values in [0, 1]")
    n = x.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def kolmogorov_sf(lam):
    """``P(K > lam)`` for the Kolmogorov distribution."""
    return special.kolmogorov(np.asarray(lam, dtype=float))


def ks_test(samples, cdf) -> KSResult:
    """One-sample KS test with the asymptotic p-value.

    Stephens' finite-``n`` correction ``(sqrt(n) + 0.12 + 0.11/sqrt(n)) D``
    is applied before evaluating the limiting tail.
    """
    n = np.asarray(samples).size
    if n < 10:
        raise StatisticsError(f"KS test needs at least 10 samples, got {n}")
    d = ks_statistic(samples, cdf)
    rn = math.sqrt(n)
    p = float(np.clip(kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d), 0.0, 1.0))
    return KSResult(statistic=d, p_value=p, n=n)


def poisson_bins(mean: float, n: int, min_expected: float = 5.0):
    """Pool Poisson(mean) outcomes into bins with expected count >= ``min_expected``.

    Returns a list of ``(lo, hi)`` inclusive ranges; the last has ``hi = inf``.
    """
    kmax = int(mean + 20.0 * math.sqrt(mean) + 20)
    pmf = _st.poisson.pmf(np.arange(kmax + 1), mean) * n
    bins, lo, acc = [], 0, 0.0
    for k in range(kmax + 1):
        acc += pmf[k]
        if acc >= min_expected:
            bins.append([lo, k])
            lo, acc = k + 1, 0.0
    if not bins:
        return []
    tail = n * _st.poisson.sf(bins[-1][1], mean)
    if tail >= min_expected:
        bins.append([bins[-1][1] + 1, math.inf])
    else:
        bins[-1][1] = math.inf
    return [tuple(b) for b in bins]


def chi_square_poisson(counts, mean: float, min_expected: float = 5.0) -> float:
    """Pearson chi-square p-value of ``counts`` against Poisson(mean), mean known."""
    c = np.asarray(counts)
    if not mean > 0:
        raise StatisticsError("mean must be positive")
    if c.size == 0 or np.any(c < 0) or np.any(c != np.floor(c)):
        raise StatisticsError("counts must be nonnegative integers")
    n = c.size
    bins = poisson_bins(mean, n, min_expected)
    if len(bins) < 2:
        raise StatisticsError("fewer than two bins after pooling")
    obs = np.array([np.sum((c >= lo) & (c <= hi)) for lo, hi in bins], dtype=float)
    expct = np.array([n * (_st.poisson.cdf(hi, mean) - _st.poisson.cdf(lo - 1, mean))
                      if math.isfinite(hi) else n * _st.poisson.sf(lo - 1, mean)
                      for lo, hi in bins])
    stat = float(np.sum((obs - expct) ** 2 / expct))
    return float(_st.chi2.sf(stat, len(bins) - 1))


def batch_mean_ci(series, batches: int = 20, level: float = 0.99):
    """Batch-means estimate of a long-run mean with a Student-t half-width.

    Leading samples that do not fill a batch are dropped.
    """
    x = np.asarray(series, dtype=float)
    if batches < 2:
        raise StatisticsError("need at least two batches")
    if x.shape[0] < 10 * batches:
        raise StatisticsError(f"series of length {x.shape[0]} too short for {batches} batches")
    m = x.shape[0] // batches
    bm = x[x.shape[0] - m * batches:].reshape((batches, m) + x.shape[1:]).mean(axis=1)
    mean = bm.mean(axis=0)
    sd = bm.std(axis=0, ddof=1)
    half = _st.t.ppf(0.5 + level / 2.0, batches - 1) * sd / math.sqrt(batches)
    return mean, half
