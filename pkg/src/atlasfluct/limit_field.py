"""Limit Gaussian laws of the fluctuation fields and the lowest-particle law.

Covariances of the two independent pieces of the limit field ``u = W + M``
are evaluated by quadrature of their defining integrals; the closed forms
available on the diagonal ``x == x'`` live next to them and serve as
independent checks.  Exact sampling goes through a jittered Cholesky
factor.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from . import rng as _rng
from .errors import CholeskyError, ParameterError, QuadratureError
from .kernels import log_substituted_quadrature, normal_cdf

_SQRT2PI = math.sqrt(2.0 * math.pi)


def _phi(z):
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _psi_scalar(x, t, y, a):
    if t == 0.0:
        return 1.0 if y <= x else 0.0
    return _phi(((math.log(x) - math.log(y)) / a - 0.5 * a * t) / math.sqrt(t))


def _q_scalar(t, x, y, a):
    z = (math.log(x) - math.log(y)) / a + 0.5 * a * t
    if abs(z) > 40.0 * math.sqrt(t):
        return 0.0
    return math.exp(-z * z / (2.0 * t)) / (math.sqrt(2.0 * math.pi * t) * a * x)


def _check_tx(t, x):
    if t < 0 or not x > 0:
        raise ParameterError("need t >= 0 and x > 0")


def _hint_points(pairs, a):
    """Break points ``exp(c +- k*sd)`` for Gaussian bumps ``(c, sd)`` in log y."""
    pts = []
    for c, sd in pairs:
        pts.append(math.exp(c))
        for k in (1.0, 3.0, 8.0):
            pts.extend((math.exp(c - k * sd), math.exp(c + k * sd)))
    return pts


# -- W: the initial-condition part -------------------------------------------------

def cov_W(t, x, tp, xp, a, tol=1e-12):
    """``E[W(t,x) W(t',x')] = integral Psi^x(t,y) Psi^x'(t',y) dy``."""
    _check_tx(t, x)
    _check_tx(tp, xp)
    if t == 0 and tp == 0:
        return float(min(x, xp))
    bumps = []
    for tt, xx in ((t, x), (tp, xp)):
        if tt > 0:
            bumps.append((math.log(xx) - 0.5 * a * a * tt, a * math.sqrt(tt)))
    pts = _hint_points(bumps, a) + [x, xp]
    return log_substituted_quadrature(lambda y: _psi_scalar(x, t, y, a) * _psi_scalar(xp, tp, y, a),
                                      tol, pts)


def cov_W_closed(t, tp, x, a):
    """Closed form on the diagonal ``x == x'`` (including the ``t = 0`` edges)."""
    if t == 0 and tp == 0:
        return float(x)
    return 2.0 * x * (1.0 - _phi(0.5 * a * math.sqrt(t + tp)))


# -- M: the white-noise part --------------------------------------------------------

def _m_inner(sig, sigp, x, xp, a):
    """``a^2 integral y^2 q_sig(y,x) q_sig'(y,x') dy``.

    With ``log y = c + s*u`` centred on the narrower bump the integrand is
    ``p_sig(z1) p_sig'(z2) y s``, where the heat-kernel arguments ``z`` are
    formed from ``u`` directly so nothing cancels for tiny ``sig``.
    """
    if sigp < sig:
        sig, sigp, x, xp = sigp, sig, xp, x
    s = a * math.sqrt(sig)
    c = math.log(x) - 0.5 * a * a * sig
    d2 = c - (math.log(xp) - 0.5 * a * a * sigp)
    r2 = math.sqrt(sigp / sig)
    n1 = 1.0 / math.sqrt(2.0 * math.pi * sig)
    n2 = 1.0 / math.sqrt(2.0 * math.pi * sigp)

    def g(u):
        w = c + s * u
        if w > 700.0:
            return 0.0
        z1 = s * u / a
        z2 = (s * u + d2) / a
        e = z1 * z1 / (2.0 * sig) + z2 * z2 / (2.0 * sigp)
        return n1 * n2 * math.exp(w - e) * s if e < 745.0 else 0.0

    u2 = -d2 / s
    # exp(w) tilts both bumps upward by a^2 * sig in u-units; cover that too
    pts = sorted({0.0, -6.0, 6.0, s, u2, u2 - 6.0 * r2, u2 + 6.0 * r2})
    edges = [-math.inf] + pts + [math.inf]
    scale = math.sqrt(x * xp) / (a * math.sqrt(sig + sigp))
    budget = 1e-13 * scale
    total = err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        res = integrate.quad(g, lo, hi, epsabs=budget, epsrel=1e-12, limit=100, full_output=1)
        total += res[0]
        err += res[1]
    if err > max(1e-11 * scale, 1e-10 * abs(total)):
        raise QuadratureError("cov_M inner integral did not converge", estimate=total, error=err)
    return total


def cov_M(t, x, tp, xp, a, rtol=1e-10):
    """``E[M(t,x) M(t',x')]`` as a double integral over ``s`` and ``y``.

    The time integral is taken in ``r = sqrt(t^t' - s)``, which removes the
    inverse-square-root singularity at ``s = t = t'``.
    """
    _check_tx(t, x)
    _check_tx(tp, xp)
    m = min(t, tp)
    if m == 0:
        return 0.0

    def outer(r):
        r2 = r * r
        return 2.0 * r * _m_inner(t - m + r2, tp - m + r2, x, xp, a)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        res = integrate.quad(outer, 0.0, math.sqrt(m), epsabs=0.0, epsrel=rtol, limit=200,
                             full_output=1)
    val, err = res[0], res[1]
    if err > max(1e-12, 100 * rtol * abs(val)):
        raise QuadratureError("cov_M time integral did not converge", estimate=val, error=err)
    return val


def cov_M_closed(t, tp, x, a):
    if min(t, tp) == 0:
        return 0.0
    return 2.0 * x * (_phi(0.5 * a * math.sqrt(t + tp)) - _phi(0.5 * a * math.sqrt(abs(t - tp))))


def cov_u(t, x, tp, xp, a):
    """Covariance of the limit field ``u = W + M`` (independent pieces)."""
    return cov_W(t, x, tp, xp, a) + cov_M(t, x, tp, xp, a)


def var_u(t, x, a, method="quadrature"):
    """Variance of ``u(t, x)``; equals ``x`` for every ``t``."""
    _check_tx(t, x)
    if method == "closed":
        return cov_W_closed(t, t, x, a) + cov_M_closed(t, t, x, a)
    return cov_W(t, x, t, x, a) + cov_M(t, x, t, x, a)


# -- G^x: recentred ranked particle ------------------------------------------------

def cov_G(t, tp, x, a):
    """Covariance of the limit process of a bulk ranked particle."""
    t = np.asarray(t, dtype=float)
    tp = np.asarray(tp, dtype=float)
    if np.any(t < 0) or np.any(tp < 0) or not x > 0:
        raise ParameterError("need t, t' >= 0 and x > 0")
    h = 0.5 * a
    val = (2.0 / (a * a * x)) * (normal_cdf(h * np.sqrt(t)) + normal_cdf(h * np.sqrt(tp))
                                 - normal_cdf(h * np.sqrt(np.abs(tp - t))) - 0.5)
    val = np.asarray(val)
    return val.item() if val.ndim == 0 else val


def cov_G_matrix(times, x, a):
    times = np.asarray(times, dtype=float)
    return cov_G(times[:, None], times[None, :], x, a)


def increment_variance_G(h, x, a):
    """``E[(G(t+h) - G(t))^2]``, independent of ``t``."""
    return (2.0 / (a * a * x)) * (2.0 * normal_cdf(0.5 * a * np.sqrt(h)) - 1.0)


def fbm_quarter_cov(t, tp):
    """Covariance of fractional Brownian motion with Hurst index 1/4."""
    t = np.asarray(t, dtype=float)
    tp = np.asarray(tp, dtype=float)
    val = 0.5 * (np.sqrt(t) + np.sqrt(tp) - np.sqrt(np.abs(t - tp)))
    return val.item() if val.ndim == 0 else val


def h_scale(x, a):
    return (2.0 * math.pi) ** 0.25 * math.sqrt(a * x) / math.sqrt(2.0)


def h_transform(x, a, g_values):
    """Rescale ``G^x`` samples so that they approach fBM(1/4) as ``a -> 0``."""
    return h_scale(x, a) * np.asarray(g_values, dtype=float)


def cov_H(t, tp, x, a):
    return h_scale(x, a) ** 2 * cov_G(t, tp, x, a)


# -- exact Gaussian sampling --------------------------------------------------------

def cholesky_jittered(cov, start=1e-14, stop=1e-10):
    """Cholesky factor, escalating diagonal jitter ``x10`` from ``start*trace``.

    Returns ``(L, jitter)`` where ``jitter`` is the absolute amount added.
    """
    cov = np.asarray(cov, dtype=float)
    if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-14):
        raise CholeskyError("covariance matrix is not symmetric")
    tr = float(np.trace(cov))
    jitter = 0.0
    rel = start
    while True:
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0])), jitter
        except np.linalg.LinAlgError:
            if rel > stop * (1 + 1e-9):
                break
            jitter = rel * tr
            rel *= 10.0
    raise CholeskyError(f"not positive definite even with jitter {stop:g}*trace")


def sample_gaussian(cov, n, rng: _rng.RngSpec, replica_offset=0):
    """``n`` exact draws of a centred Gaussian vector with covariance ``cov``.

    Coordinates with zero variance are returned as exact zeros.
    """
    cov = np.asarray(cov, dtype=float)
    d = cov.shape[0]
    live = np.flatnonzero(np.diag(cov) > 0)
    out = np.zeros((n, d))
    if live.size:
        L, _ = cholesky_jittered(cov[np.ix_(live, live)])
        reps = np.arange(replica_offset, replica_offset + n, dtype=np.uint64)[:, None]
        z = rng.normal(reps, np.arange(live.size, dtype=np.uint64)[None, :], 0)
        out[:, live] = z @ L.T
    return out


def sample_limit_G(x, time_grid, n, rng: _rng.RngSpec, a, replica_offset=0):
    """Exact ``(n, len(time_grid))`` samples of ``G^x`` on a grid."""
    grid = np.asarray(time_grid, dtype=float)
    if grid.ndim != 1 or np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise ParameterError("time grid must be nonnegative and strictly increasing")
    if not x > 0:
        raise ParameterError("x must be positive")
    return sample_gaussian(cov_G_matrix(grid, x, a), n, rng, replica_offset)


def u_covariance(points, a):
    """Covariance matrix of ``u`` over ``(t, x)`` points, cross-``x`` terms included."""
    pts = [(float(t), float(x)) for t, x in points]
    n = len(pts)
    c = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            c[i, j] = c[j, i] = cov_u(pts[i][0], pts[i][1], pts[j][0], pts[j][1], a)
    return c


def sample_u(points, n, rng: _rng.RngSpec, a, replica_offset=0):
    return sample_gaussian(u_covariance(points, a), n, rng, replica_offset)


@dataclass(frozen=True)
class LimitCovariance:
    """Limit laws bound to ``(a, gamma)``; ``gamma`` does not enter them."""

    a: float
    gamma: float = 0.0

    def __post_init__(self):
        if not self.a > 0 or self.gamma < 0:
            raise ParameterError("need a > 0 and gamma >= 0")

    def cov_W(self, t, x, tp, xp):
        return cov_W(t, x, tp, xp, self.a)

    def cov_M(self, t, x, tp, xp):
        return cov_M(t, x, tp, xp, self.a)

    def cov_u(self, t, x, tp, xp):
        return cov_u(t, x, tp, xp, self.a)

    def var_u(self, t, x, method="quadrature"):
        return var_u(t, x, self.a, method)

    def cov_G(self, t, tp, x):
        return cov_G(t, tp, x, self.a)

    def sample_G(self, x, time_grid, n, rng, replica_offset=0):
        return sample_limit_G(x, time_grid, n, rng, self.a, replica_offset)


# -- lowest particle ---------------------------------------------------------------

@dataclass(frozen=True)
class LowestLimit:
    """Law of ``eta`` (density ``c e^{(2g+a)x} e^{-e^{ax}}``) and of ``eta2 - eta1``."""

    a: float
    gamma: float
    norm_const: float
    printed_const: float
    grid: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return 1.0 + 2.0 * self.gamma / self.a

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        ax = self.a * x
        with np.errstate(over="ignore"):
            return self.norm_const * np.exp((2.0 * self.gamma + self.a) * x - np.exp(ax))

    def cdf(self, x):
        """``P(eta <= x) = P(Gamma(shape) <= e^{ax})``."""
        with np.errstate(over="ignore"):
            return special.gammainc(self.shape, np.exp(self.a * np.asarray(x, dtype=float)))

    def mean(self):
        return special.digamma(self.shape) / self.a

    def sd(self):
        return math.sqrt(special.polygamma(1, self.shape)) / self.a

    def diff_cdf(self, d):
        """``P(eta2 - eta1 <= d) = integral f(y) F(y + d) dy`` by the trapezoid rule."""
        d = np.atleast_1d(np.asarray(d, dtype=float))
        out = np.empty(d.shape)
        flat = d.ravel()
        res = out.ravel()
        step = max(1, 2 ** 22 // self.grid.size)
        for i in range(0, flat.size, step):
            chunk = flat[i:i + step]
            res[i:i + step] = self.cdf(self.grid[None, :] + chunk[:, None]) @ self.weights
        return np.clip(res.reshape(d.shape), 0.0, 1.0)


def lowest_limit(gamma: float, a: float, n_grid: int = 2 ** 14, tail: float = 1e-16) -> LowestLimit:
    """Build the lowest-particle limit law with a quadrature-certified normalization."""
    if not a > 0 or gamma < 0:
        raise ParameterError("need a > 0 and gamma >= 0")
    k = 1.0 + 2.0 * gamma / a
    b = 2.0 * gamma + a

    def unnorm(x):
        return math.exp(b * x - math.exp(a * x)) if a * x < 700 else 0.0

    mode = math.log(k) / a
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        left = integrate.quad(unnorm, -math.inf, mode, epsabs=0, epsrel=1e-13, full_output=1)
        right = integrate.quad(unnorm, mode, math.inf, epsabs=0, epsrel=1e-13, full_output=1)
    total = left[0] + right[0]
    if left[1] + right[1] > 1e-10 * total:
        raise QuadratureError("normalization of the lowest-particle density failed",
                              estimate=total, error=left[1] + right[1])
    lo = math.log(special.gammaincinv(k, tail)) / a
    hi = math.log(special.gammainccinv(k, tail)) / a
    grid = np.linspace(lo, hi, n_grid)
    h = grid[1] - grid[0]
    c = 1.0 / total
    with np.errstate(over="ignore"):
        dens = c * np.exp(b * grid - np.exp(a * grid))
    w = dens * h
    w[0] *= 0.5
    w[-1] *= 0.5
    return LowestLimit(a=a, gamma=gamma, norm_const=c, printed_const=1.0 / special.gamma(k),
                       grid=grid, weights=w)


def logistic_cdf(d, a):
    return special.expit(a * np.asarray(d, dtype=float))


def driftless_lowest_cdf(d, T, a):
    """Exact law of ``X_(0)(T) + aT/2 - X_(0)(0)`` for ``gamma = 0`` at finite ``T``.

    With no drift the particles are independent Brownian motions started
    from a Poisson field of intensity ``a e^{ax}``; conditioning on the
    initial minimum and using the Poisson void probability gives
    ``P(D > d) = S / (S + e^{ad} Phi((d + aT/2)/sqrt(T)))`` with
    ``S = 1 - Phi((d - aT/2)/sqrt(T))``.  Tends to the logistic law as
    ``T -> inf``.
    """
    if not T > 0 or not a > 0:
        raise ParameterError("need T > 0 and a > 0")
    d = np.asarray(d, dtype=float)
    s = math.sqrt(T)
    with np.errstate(over="ignore"):
        # log-space ratio keeps both tails finite
        log_ratio = a * d + special.log_ndtr((d + 0.5 * a * T) / s) - special.log_ndtr(-(d - 0.5 * a * T) / s)
    out = special.expit(log_ratio)
    return out.item() if out.ndim == 0 else out
