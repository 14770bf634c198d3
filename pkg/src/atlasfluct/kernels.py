"""Heat kernel, geometric-BM kernels and the mollifier Psi, with quadrature.

Every closed form here is a Gaussian in ``log y``; the quadrature helper
integrates in ``w = log y`` so the identities can be certified numerically.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import ParameterError, QuadratureError

_SQRT2 = math.sqrt(2.0)
_CUTOFF_SD = 40.0


def _positive(name, *vals):
    for v in vals:
        if np.any(np.asarray(v) <= 0):
            raise ParameterError(f"{name}: arguments must be positive")


def _scalar_or_array(x):
    return x.item() if isinstance(x, np.ndarray) and x.ndim == 0 else x


def heat_kernel(t, z):
    """Gaussian density with variance ``t``; exactly 0 beyond 40 sd."""
    _positive("heat_kernel", t)
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    val = np.exp(-z * z / (2.0 * t)) / np.sqrt(2.0 * math.pi * t)
    val = np.where(np.abs(z) > _CUTOFF_SD * np.sqrt(t), 0.0, val)
    return _scalar_or_array(val)


def normal_cdf(z):
    z = np.asarray(z, dtype=float)
    # erfc of a positive argument in both tails keeps full relative accuracy
    val = np.where(z < 0, 0.5 * special.erfc(-z / _SQRT2), 1.0 - 0.5 * special.erfc(z / _SQRT2))
    return _scalar_or_array(val)


def _log_arg(t, x, y, a, sign):
    return (np.log(x) - np.log(y)) / a + sign * 0.5 * a * np.asarray(t, dtype=float)


def q_kernel(t, x, y, a):
    """``q_t(x, y) = p_t(log x/a - log y/a + a t/2) / (a x)``."""
    _positive("q_kernel", t, x, y, a)
    return _scalar_or_array(np.asarray(heat_kernel(t, _log_arg(t, x, y, a, +1.0))) / (a * np.asarray(x, dtype=float)))


def hatq_kernel(t, x, y, a):
    """``q^_t(x, y) = p_t(log x/a - log y/a - a t/2) / (a x)``."""
    _positive("hatq_kernel", t, x, y, a)
    return _scalar_or_array(np.asarray(heat_kernel(t, _log_arg(t, x, y, a, -1.0))) / (a * np.asarray(x, dtype=float)))


def psi(x, t, y, a):
    """``Psi^x(t, y) = integral_0^x q^_t(z, y) dz``, in closed form."""
    _positive("psi", x, t, y, a)
    return normal_cdf(_log_arg(t, x, y, a, -1.0) / np.sqrt(t))


def psi_dy(x, t, y, a):
    """``d/dy Psi^x(t, y) = -p_t(arg) / (a y)`` (equal to ``-q_t(y, x)``)."""
    _positive("psi_dy", x, t, y, a)
    arg = _log_arg(t, x, y, a, -1.0)
    return _scalar_or_array(-np.asarray(heat_kernel(t, arg)) / (a * np.asarray(y, dtype=float)))


def psi_dt(x, t, y, a):
    _positive("psi_dt", x, t, y, a)
    arg = _log_arg(t, x, y, a, -1.0)
    # heat equation: d/dt int^arg p_t = (1/2) p_t'(arg) = -arg/(2t) p_t(arg)
    return _scalar_or_array((-0.5 * a - 0.5 * arg / np.asarray(t, dtype=float)) * np.asarray(heat_kernel(t, arg)))


def log_substituted_quadrature(f, tol: float = 1e-10, points=None, rtol: float = 0.0,
                               limit: int = 200) -> float:
    """Integrate ``f`` over ``(0, inf)`` after substituting ``y = exp(w)``.

    ``points`` are optional break points in ``y`` (kinks, peak locations);
    the ``w``-line is split there and each piece goes to adaptive
    Gauss-Kronrod.  Raises :class:`QuadratureError` when a piece fails to
    converge or the summed error estimate exceeds ``max(tol, rtol*|I|)``.
    """
    ws = [0.0] if points is None else sorted({float(math.log(p)) for p in np.atleast_1d(points) if p > 0})
    if not ws:
        ws = [0.0]
    edges = [-math.inf] + ws + [math.inf]
    budget = tol / (len(edges) - 1)

    def g(w):
        if not -745.0 < w < 709.0:
            return 0.0  # y underflows to 0 or overflows; f*y vanishes there
        y = math.exp(w)
        return float(f(y)) * y

    total = 0.0
    err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            res = integrate.quad(g, lo, hi, epsabs=budget, epsrel=rtol, limit=limit, full_output=1)
        val, e = res[0], res[1]
        # a fourth element is the warning message: quad flagged non-convergence
        if len(res) > 3 and e > max(budget, rtol * abs(val)):
            raise QuadratureError(f"quadrature did not converge on [{lo}, {hi}]",
                                  estimate=total + val, error=err + e)
        total += val
        err += e
    if err > max(tol, rtol * abs(total)):
        raise QuadratureError("quadrature error estimate above tolerance", estimate=total, error=err)
    return total


def gaussian_points(center_w, width_w, spread=(0.0, 1.0, 3.0, 8.0)):
    """Break points in ``y`` around a Gaussian bump centred at ``log y = center_w``."""
    pts = set()
    for c in np.atleast_1d(center_w):
        for s in spread:
            pts.add(math.exp(c - s * width_w))
            pts.add(math.exp(c + s * width_w))
    return sorted(pts)


@dataclass(frozen=True)
class KernelEval:
    """Kernels bound to one value of ``a``."""

    a: float

    def __post_init__(self):
        _positive("KernelEval", self.a)

    def q(self, t, x, y):
        return q_kernel(t, x, y, self.a)

    def hatq(self, t, x, y):
        return hatq_kernel(t, x, y, self.a)

    def psi(self, x, t, y):
        return psi(x, t, y, self.a)

    def psi_dy(self, x, t, y):
        return psi_dy(x, t, y, self.a)

    def psi_dt(self, x, t, y):
        return psi_dt(x, t, y, self.a)

    # -- mass identities --------------------------------------------------
    def hatq_mass_dz(self, t, y, tol=1e-12):
        """``integral q^_t(z, y) dz`` (should be 1)."""
        a = self.a
        c = math.log(y) + 0.5 * a * a * t
        return log_substituted_quadrature(lambda z: hatq_kernel(t, z, y, a), tol,
                                          gaussian_points(c, a * math.sqrt(t)))

    def hatq_mass_dy(self, t, z, tol=1e-12):
        """``integral q^_t(z, y) dy`` (should be 1)."""
        a = self.a
        c = math.log(z) + 0.5 * a * a * t
        return log_substituted_quadrature(lambda y: hatq_kernel(t, z, y, a), tol,
                                          gaussian_points(c, a * math.sqrt(t)))

    def q_mass_dz(self, t, y, tol=1e-12):
        a = self.a
        c = math.log(y) - 0.5 * a * a * t
        return log_substituted_quadrature(lambda z: q_kernel(t, z, y, a), tol,
                                          gaussian_points(c, a * math.sqrt(t)))

    def q_mass_dy(self, t, z, rtol=1e-10):
        """``integral q_t(z, y) dy`` (should be ``exp(a^2 t)``)."""
        a = self.a
        c = math.log(z) + 1.5 * a * a * t
        return log_substituted_quadrature(lambda y: q_kernel(t, z, y, a), 0.0,
                                          gaussian_points(c, a * math.sqrt(t)), rtol=rtol)

    def psi_mass(self, x, t, tol=1e-12):
        """``integral Psi^x(t, y) dy`` (should be ``x``)."""
        a = self.a
        c = math.log(x) - 0.5 * a * a * t
        return log_substituted_quadrature(lambda y: psi(x, t, y, a), tol,
                                          gaussian_points(c, a * math.sqrt(t)))


def identity_table(a_values=(0.5, 1.0, 2.0), t_values=(0.1, 1.0, 5.0), yz_values=(0.5, 1.0, 2.0)):
    """Residuals of the kernel mass identities over a parameter grid.

    Returns rows ``(identity, params, residual, tolerance)``; the
    ``exp(a^2 t)`` identity reports a relative residual.
    """
    rows = []
    for a in a_values:
        k = KernelEval(a)
        for t in t_values:
            for v in yz_values:
                p = f"a={a};t={t};y|z|x={v}"
                rows.append(("int hatq dz = 1", p, abs(k.hatq_mass_dz(t, v) - 1.0), 1e-8))
                rows.append(("int hatq dy = 1", p, abs(k.hatq_mass_dy(t, v) - 1.0), 1e-8))
                rows.append(("int q dz = 1", p, abs(k.q_mass_dz(t, v) - 1.0), 1e-8))
                target = math.exp(a * a * t)
                rows.append(("int q dy = exp(a^2 t)", p, abs(k.q_mass_dy(t, v) - target) / target, 1e-6))
                rows.append(("int psi dy = x", p, abs(k.psi_mass(v, t) - v), 1e-8))
    return rows
