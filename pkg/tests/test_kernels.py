import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from atlasfluct import kernels as K
from atlasfluct.errors import ParameterError, QuadratureError

pos = st.floats(0.05, 20.0)
a_s = st.floats(0.2, 3.0)
t_s = st.floats(0.01, 8.0)


def test_heat_kernel_values():
    assert K.heat_kernel(1.0, 0.0) == pytest.approx(0.3989422804014327, rel=1e-15)
    assert K.heat_kernel(1.0, 1.3) == K.heat_kernel(1.0, -1.3)
    assert K.heat_kernel(1.0, 41.0) == 0.0
    for t in (0.1, 1.0, 10.0):
        mass = integrate.quad(lambda z: K.heat_kernel(t, z), -math.inf, math.inf, epsabs=1e-13)[0]
        assert abs(mass - 1) < 1e-10
    with pytest.raises(ParameterError):
        K.heat_kernel(0.0, 1.0)


def test_normal_cdf_values():
    assert K.normal_cdf(0.0) == 0.5
    assert K.normal_cdf(1.0) == pytest.approx(0.8413447460685429, rel=1e-15)
    z = np.linspace(-30, 30, 121)
    assert np.allclose(K.normal_cdf(z) + K.normal_cdf(-z), 1.0, rtol=0, atol=1e-15)


def test_q_and_hatq_frozen_values():
    v = math.exp(-1 / 8) / math.sqrt(2 * math.pi)
    assert K.q_kernel(1, 1, 1, 1) == pytest.approx(v, rel=1e-14)
    assert K.hatq_kernel(1, 1, 1, 1) == pytest.approx(v, rel=1e-14)
    assert v == pytest.approx(0.3520653, abs=1e-7)


def test_psi_frozen_value_and_limits():
    assert K.psi(1, 1, 1, 1) == pytest.approx(0.3085375387259869, rel=1e-14)
    assert K.psi(1, 1, 1e-12, 1) == pytest.approx(1.0)
    assert K.psi(1, 1, 1e12, 1) == pytest.approx(0.0, abs=1e-12)


@given(a_s, t_s, pos, pos)
def test_kernels_finite_and_nonnegative(a, t, x, y):
    for f in (K.q_kernel, K.hatq_kernel):
        v = f(t, x, y, a)
        assert math.isfinite(v) and v >= 0
    assert 0 <= K.psi(x, t, y, a) <= 1


@given(a_s, t_s, pos, pos)
def test_q_is_time_shifted_hatq(a, t, z, y):
    assert K.q_kernel(t, z, y, a) == pytest.approx(K.hatq_kernel(t, z, y * math.exp(-a * a * t), a),
                                                   rel=1e-9, abs=1e-300)


def test_q_hatq_shift_at_unit_a():
    for t, z, y in [(0.3, 1.0, 2.0), (1.0, 0.5, 0.7), (2.0, 3.0, 1.0)]:
        assert K.q_kernel(t, z, y, 1.0) == pytest.approx(K.hatq_kernel(t, z, y * math.exp(-t), 1.0),
                                                         rel=1e-12)


@given(a_s, t_s, pos, pos)
def test_psi_dy_is_minus_q(a, t, x, y):
    assert K.psi_dy(x, t, y, a) == pytest.approx(-K.q_kernel(t, y, x, a), rel=1e-12, abs=1e-300)


def test_psi_dy_finite_difference():
    h = 1e-5
    fd = (K.psi(1, 1, 1 + h, 1) - K.psi(1, 1, 1 - h, 1)) / (2 * h)
    assert fd == pytest.approx(-K.q_kernel(1, 1, 1, 1), rel=1e-6)


def test_psi_dt_finite_difference_and_special_point():
    h = 1e-5
    fd = (K.psi(1, 1 + h, 2, 1) - K.psi(1, 1 - h, 2, 1)) / (2 * h)
    assert fd == pytest.approx(K.psi_dt(1, 1, 2, 1), rel=1e-6)
    a, t, x = 1.5, 0.7, 2.0
    y = x * math.exp(-a * a * t / 2)
    assert K.psi_dt(x, t, y, a) == pytest.approx(-a / 2 * K.heat_kernel(t, 0.0), rel=1e-10)


def test_gradient_norm_scales_like_inverse_root_t():
    def norm2(t, a=1.0, x=1.0):
        f = lambda y: (y * K.psi_dy(x, t, y, a)) ** 2
        c = math.log(x) - a * a * t / 2
        return K.log_substituted_quadrature(f, 1e-12, K.gaussian_points(c, a * math.sqrt(t)), rtol=1e-10)

    assert norm2(0.01) / norm2(0.04) == pytest.approx(2.0, rel=0.02)


def test_quadrature_examples():
    v = K.log_substituted_quadrature(lambda y: K.hatq_kernel(1, 1, y, 1), 1e-12,
                                     K.gaussian_points(0.5, 1.0))
    assert abs(v - 1) < 1e-10
    box = K.log_substituted_quadrature(lambda y: 1.0 if y < 1 else 0.0, 1e-10, [1.0])
    assert abs(box - 1) < 1e-10


def test_quadrature_matches_dense_trapezoid():
    f = lambda y: y * K.hatq_kernel(1, 1, y, 1) ** 2
    v = K.log_substituted_quadrature(f, 1e-13, K.gaussian_points(0.5, 1.0))
    w = np.linspace(-12, 12, 1_000_001)
    y = np.exp(w)
    trap = np.trapezoid(y * np.asarray(K.hatq_kernel(1, 1, y, 1)) ** 2 * y, w) \
        if hasattr(np, "trapezoid") else np.trapz(y * np.asarray(K.hatq_kernel(1, 1, y, 1)) ** 2 * y, w)
    assert abs(v - trap) < 1e-8


def test_quadrature_failure_raises():
    with pytest.raises(QuadratureError):
        K.log_substituted_quadrature(lambda y: 1.0 / (y - 1.0) ** 2 if y != 1 else 0.0, 1e-10,
                                     [0.5, 2.0], limit=5)


def test_mass_identity_examples():
    k = K.KernelEval(1.0)
    assert abs(k.q_mass_dz(1, 1) - 1) < 1e-8
    assert k.q_mass_dy(0.5, 1) == pytest.approx(math.exp(0.5), rel=1e-6)
    assert abs(k.psi_mass(2, 1) - 2) < 1e-8
    for a in (0.5, 1, 2):
        for t in (0.1, 1, 5):
            ka = K.KernelEval(a)
            assert abs(ka.hatq_mass_dz(t, 1.3) - 1) < 1e-8
            assert abs(ka.hatq_mass_dy(t, 0.7) - 1) < 1e-8


def test_identity_table_passes():
    rows = K.identity_table(a_values=(1.0,), t_values=(1.0,), yz_values=(0.5, 2.0))
    assert rows and all(r[2] <= r[3] for r in rows)
