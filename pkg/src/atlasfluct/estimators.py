"""Centered and scaled fluctuation statistics computed from recorded paths.

Every estimator accepts a :class:`~atlasfluct.model.SimPath`, a
:class:`~atlasfluct.dynamics.PathEnsemble` or a list of paths, and
returns values indexed ``(replica, t, x)``.  Requested times must be
recording times of the paths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridError, ParameterError, SaturationError, StatisticsError
from .model import ModelParams, SimPath, eps_shift

# bulk indices must sit this far below the truncation
VALIDITY_FACTOR = 3


@dataclass(frozen=True)
class FieldGrid:
    """Field values on a ``t x x`` grid, one slab per replica."""

    eps: float
    t_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray
    name: str = "field"

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        x = np.asarray(self.x_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if not 0 < self.eps <= 1:
            raise ParameterError("eps must lie in (0, 1]")
        for g in (t, x):
            if g.ndim != 1 or (g.size > 1 and np.any(np.diff(g) <= 0)):
                raise GridError("grids must be strictly increasing")
        if v.shape[1:] != (t.size, x.size):
            raise GridError("values must have shape (replicas, len(t_grid), len(x_grid))")
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "x_grid", x)
        object.__setattr__(self, "values", v)

    @property
    def replicas(self) -> int:
        return self.values.shape[0]

    def rows(self, replica_ids=None):
        """Long-format ``(replica, t, x, value)`` rows."""
        rid = np.arange(self.replicas) if replica_ids is None else np.asarray(replica_ids)
        r, it, ix = np.meshgrid(np.arange(self.replicas), np.arange(self.t_grid.size),
                                np.arange(self.x_grid.size), indexing="ij")
        return np.column_stack([rid[r.ravel()], self.t_grid[it.ravel()],
                                self.x_grid[ix.ravel()], self.values.ravel()])


@dataclass(frozen=True)
class _Paths:
    params: ModelParams
    times: np.ndarray
    positions: np.ndarray  # (R, n_t, K)
    ranks: np.ndarray


def _gather(paths) -> _Paths:
    if hasattr(paths, "positions") and np.ndim(paths.positions) == 3:
        return _Paths(paths.params, np.asarray(paths.times), np.asarray(paths.positions),
                      np.asarray(paths.ranks))
    if isinstance(paths, SimPath):
        paths = [paths]
    paths = list(paths)
    if not paths:
        raise ParameterError("no paths given")
    p0 = paths[0]
    for p in paths[1:]:
        if not (np.array_equal(p.times, p0.times) and np.array_equal(p.ranks, p0.ranks)):
            raise ParameterError("paths were recorded on different grids")
    return _Paths(p0.params, np.asarray(p0.times), np.stack([p.positions for p in paths]),
                  np.asarray(p0.ranks))


def _time_index(times, t_grid):
    t_grid = np.asarray(t_grid, dtype=float)
    idx = np.searchsorted(times, t_grid - 1e-9)
    ok = (idx < times.size) & (np.abs(times[np.minimum(idx, times.size - 1)] - t_grid) <= 1e-9)
    if not np.all(ok):
        raise GridError(f"times {t_grid[~ok].tolist()} were not recorded")
    return idx


def _rank_column(ranks, i):
    j = np.searchsorted(ranks, i)
    if j >= ranks.size or ranks[j] != i:
        raise GridError(f"rank {i} was not recorded")
    return int(j)


def bulk_index(eps: float, x: float) -> int:
    """``i_eps(x) = floor(eps^{-1/2} x)``."""
    return int(math.floor(x / math.sqrt(eps) + 1e-9))


def check_bulk_grid(eps, x_grid, n_particles):
    """Reject a ``Y``-axis grid whose indices come close to the truncation."""
    if not 0 < eps <= 1:
        raise ParameterError("eps must lie in (0, 1]")
    x_grid = np.asarray(x_grid, dtype=float)
    if np.any(x_grid <= 0):
        raise GridError("x grid must be positive")
    i_max = bulk_index(eps, float(x_grid.max()))
    if VALIDITY_FACTOR * i_max > n_particles:
        raise GridError(f"i_eps(max x) = {i_max} exceeds N/{VALIDITY_FACTOR} for N = {n_particles}")
    return np.array([bulk_index(eps, x) for x in x_grid], dtype=np.int64)


def count_field(paths, eps: float, t_grid, x_grid) -> FieldGrid:
    """``eps^{1/4} (#{X^eps_i(t) <= x} - eps^{-1/2} e^{ax})``."""
    p = _gather(paths)
    a, n = p.params.a, p.params.n_particles
    if p.ranks.size != n:
        raise GridError("count_field needs full frames")
    x_grid = np.asarray(x_grid, dtype=float)
    centre = np.exp(a * x_grid) / math.sqrt(eps)
    if np.any(VALIDITY_FACTOR * centre > n):
        raise GridError("count scale eps^{-1/2} e^{ax} too close to the truncation")
    ti = _time_index(p.times, t_grid)
    shift = eps_shift(a, eps)
    out = np.empty((p.positions.shape[0], ti.size, x_grid.size))
    for r in range(out.shape[0]):
        for k, it in enumerate(ti):
            xe = p.positions[r, it] + 0.5 * a * p.times[it] + shift
            c = np.searchsorted(xe, x_grid, side="right")
            if np.any(c >= n):
                raise GridError("count reached the truncation N")
            out[r, k] = c
    return FieldGrid(eps, p.times[ti], x_grid, eps ** 0.25 * (out - centre), "count")


def ranked_field(paths, eps: float, t_grid, x_grid) -> FieldGrid:
    """``eps^{-1/4} (X^eps_(i_eps(x))(t) - log(x)/a)``."""
    p = _gather(paths)
    a = p.params.a
    idx = check_bulk_grid(eps, x_grid, p.params.n_particles)
    cols = [_rank_column(p.ranks, i) for i in idx]
    ti = _time_index(p.times, t_grid)
    x_grid = np.asarray(x_grid, dtype=float)
    xe = p.positions[:, ti][:, :, cols] + 0.5 * a * p.times[ti][None, :, None] + eps_shift(a, eps)
    return FieldGrid(eps, p.times[ti], x_grid, eps ** -0.25 * (xe - np.log(x_grid) / a), "ranked")


def _log_y(p: _Paths, ti):
    """``log Y = a (X + a t/2)`` on the selected frames."""
    a = p.params.a
    return a * (p.positions[:, ti] + 0.5 * a * p.times[ti][None, :, None])


def chi_triple(paths, eps: float, t_grid, x_grid):
    """The three Y-axis fields ``(chi_check, chi_tilde, chi)``.

    ``chi_check = eps^{1/4} (i - Y_(i)(t))`` with ``i = i_eps(x)``;
    ``chi_tilde`` uses ``I_0(x)`` in place of ``i``;
    ``chi = eps^{1/4} (I_t(x) - eps^{-1/2} x)``, where ``I_t(x)`` is the
    number of ``Y_i(t) <= eps^{-1/2} x``.
    """
    p = _gather(paths)
    n = p.params.n_particles
    if p.ranks.size != n:
        raise GridError("chi_triple needs full frames")
    idx = check_bulk_grid(eps, x_grid, n)
    x_grid = np.asarray(x_grid, dtype=float)
    ti = _time_index(p.times, t_grid)
    t0 = _time_index(p.times, [0.0])
    ly = _log_y(p, ti)
    ly0 = _log_y(p, t0)[:, 0]
    lvl = np.log(x_grid / math.sqrt(eps))
    R = ly.shape[0]
    check = np.empty((R, ti.size, x_grid.size))
    tilde = np.empty_like(check)
    chi = np.empty_like(check)
    q = eps ** 0.25
    for r in range(R):
        i0 = np.searchsorted(ly0[r], lvl, side="right")
        if np.any(i0 >= n):
            raise GridError("I_0(x) reached the truncation N")
        for k in range(ti.size):
            row = ly[r, k]
            it = np.searchsorted(row, lvl, side="right")
            if np.any(it >= n):
                raise GridError("I_t(x) reached the truncation N")
            if row[max(idx.max(), i0.max())] > 700:
                raise SaturationError("Y overflow on the grid ranks")
            check[r, k] = q * (idx - np.exp(row[idx]))
            tilde[r, k] = q * (i0 - np.exp(row[i0]))
            chi[r, k] = q * (it - x_grid / math.sqrt(eps))
    times = p.times[ti]
    return (FieldGrid(eps, times, x_grid, check, "chi_check"),
            FieldGrid(eps, times, x_grid, tilde, "chi_tilde"),
            FieldGrid(eps, times, x_grid, chi, "chi"))


def g_path_estimator(paths, eps: float, x: float, t_grid=None) -> np.ndarray:
    """``eps^{-1/4} (X^eps_(i)(t) - X^eps_(i)(0))`` with ``i = i_eps(x)``.

    Returns an array of shape ``(replicas, len(t_grid))``; ``t_grid``
    defaults to every recorded time.
    """
    p = _gather(paths)
    i = int(check_bulk_grid(eps, [x], p.params.n_particles)[0])
    col = _rank_column(p.ranks, i)
    ti = np.arange(p.times.size) if t_grid is None else _time_index(p.times, t_grid)
    t0 = int(_time_index(p.times, [0.0])[0])
    track = p.positions[:, ti, col] + 0.5 * p.params.a * p.times[ti][None, :]
    return eps ** -0.25 * (track - p.positions[:, t0, col][:, None])


def lowest_statistic(paths, a: float | None = None) -> np.ndarray:
    """``X_(0)(T) + a T / 2`` per replica, at the last recorded time."""
    p = _gather(paths)
    a = p.params.a if a is None else a
    col = _rank_column(p.ranks, 0)
    return p.positions[:, -1, col] + 0.5 * a * p.times[-1]


def empirical_cov(values, min_replicas: int = 30):
    """Unbiased sample covariance with a leave-one-out jackknife standard error.

    ``values`` is ``(R,)`` or ``(R, d)``; the return is ``(cov, se)`` with
    scalars for 1-d input and ``(d, d)`` arrays otherwise.
    """
    v = np.asarray(values, dtype=float)
    scalar = v.ndim == 1
    if scalar:
        v = v[:, None]
    if v.ndim != 2:
        raise StatisticsError("values must be (replicas,) or (replicas, d)")
    n = v.shape[0]
    if n < min_replicas:
        raise StatisticsError(f"need at least {min_replicas} replicas, got {n}")
    d = v - v.mean(axis=0)
    S = d.T @ d
    cov = S / (n - 1)
    # leave-one-out: S_{-k} = S - n/(n-1) d_k d_k^T
    loo = (S[None] - (n / (n - 1)) * d[:, :, None] * d[:, None, :]) / (n - 2)
    se = np.sqrt((n - 1) / n * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    if scalar:
        return float(cov[0, 0]), float(se[0, 0])
    return cov, se


def structure_exponent(paths, times, h_range=(1e-3, 1e-1), n_lags: int = 12):
    """Slope of ``log E[(X(t+h) - X(t))^2]`` against ``log h``.

    ``paths`` is ``(replicas, len(times))`` on a uniform grid.  Lags are
    log-spaced integers within ``h_range`` and each uses non-overlapping
    increments.  Returns ``(slope, intercept, stderr)``.
    """
    x = np.asarray(paths, dtype=float)
    times = np.asarray(times, dtype=float)
    if x.ndim != 2 or x.shape[1] != times.size or times.size < 3:
        raise GridError("paths must be (replicas, len(times)) with at least 3 times")
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=1e-6, atol=1e-12):
        raise GridError("time grid must be uniform")
    lo, hi = h_range
    l_lo = max(1, int(math.ceil(lo / dt - 1e-9)))
    l_hi = min(times.size - 1, int(math.floor(hi / dt + 1e-9)))
    if l_hi < l_lo:
        raise GridError("time grid does not resolve h_range")
    lags = np.unique(np.round(np.geomspace(l_lo, l_hi, n_lags)).astype(int))
    if lags.size < 3:
        raise GridError("fewer than three distinct lags in h_range")
    msd = np.array([np.mean(np.diff(x[:, ::L], axis=1) ** 2) for L in lags])
    if np.any(msd <= 0):
        raise StatisticsError("zero mean-squared increment")
    lh, lm = np.log(lags * dt), np.log(msd)
    A = np.column_stack([lh, np.ones_like(lh)])
    coef, res, *_ = np.linalg.lstsq(A, lm, rcond=None)
    resid = lm - A @ coef
    s2 = float(resid @ resid) / max(1, lags.size - 2)
    se = math.sqrt(s2 / float(np.sum((lh - lh.mean()) ** 2)))
    return float(coef[0]), float(coef[1]), se
