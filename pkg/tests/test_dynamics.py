import math

import numpy as np
import pytest
from scipy import stats

from atlasfluct._accel import HAVE_NUMBA
from atlasfluct.dynamics import (euler_step, gap_series, integrate, record_steps_for,
                                 simulate_paths)
from atlasfluct.errors import IntegrationError, ParameterError
from atlasfluct.model import ModelParams, ParticleConfig
from atlasfluct.rng import RngSpec
from atlasfluct.samplers import ProfileKind, ProfileSpec

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def _nu(p):
    return ProfileSpec(ProfileKind.NU, p)


def test_rerun_is_bitwise_identical_and_replicas_differ():
    p = ModelParams(a=1.0, gamma=0.5, n_particles=50, dt=1e-2, horizon=1.0)
    e1 = simulate_paths(_nu(p), p, [0.0, 0.5, 1.0], 2, RngSpec(1))
    e2 = simulate_paths(_nu(p), p, [0.0, 0.5, 1.0], 2, RngSpec(1))
    assert np.array_equal(e1.positions, e2.positions)
    assert not np.array_equal(e1.positions[0], e1.positions[1])
    assert e1.path(1).replica_id == 1 and e1.path(0).seed == 1


def test_replica_offset_reproduces_a_slice():
    p = ModelParams(n_particles=20, dt=1e-2, horizon=0.5)
    full = simulate_paths(_nu(p), p, [0.5], 4, RngSpec(2))
    part = simulate_paths(_nu(p), p, [0.5], 2, RngSpec(2), replica_offset=2)
    assert np.array_equal(full.positions[2:], part.positions)


@needs_numba
def test_numba_and_numpy_backends_agree_bitwise():
    p = ModelParams(a=1.0, gamma=1.0, n_particles=64, dt=1e-3, horizon=0.2)
    times = [0.0, 0.05, 0.2]
    a = simulate_paths(_nu(p), p, times, 3, RngSpec(3), backend="numba")
    b = simulate_paths(_nu(p), p, times, 3, RngSpec(3), backend="numpy")
    assert np.array_equal(a.positions, b.positions)
    sel_a = simulate_paths(_nu(p), p, times, 3, RngSpec(3), backend="numba", ranks=[0, 10])
    sel_b = simulate_paths(_nu(p), p, times, 3, RngSpec(3), backend="numpy", ranks=[0, 10])
    assert np.array_equal(sel_a.positions, sel_b.positions)
    assert np.array_equal(sel_a.positions, a.positions[:, :, [0, 10]])


def test_euler_step_chain_matches_integrator():
    p = ModelParams(a=1.0, gamma=2.0, n_particles=12, dt=1e-2, horizon=0.3)
    spec = RngSpec(4)
    ens = simulate_paths(_nu(p), p, [0.0, 0.3], 1, RngSpec(4), backend="numpy")
    c = ParticleConfig(0.0, ens.positions[0, 0])
    for s in range(p.n_steps):
        c = euler_step(c, p, spec, s)
    assert np.array_equal(c.positions, ens.positions[0, -1])
    assert c.time == pytest.approx(0.3)


def test_single_particle_is_brownian_with_drift():
    p = ModelParams(a=1.0, gamma=0.7, n_particles=1, dt=1e-2, horizon=1.0)
    ens = simulate_paths(_nu(p), p, [0.0, 1.0], 4000, RngSpec(5))
    d = ens.positions[:, 1, 0] - ens.positions[:, 0, 0] - p.gamma * 1.0
    var, se = np.var(d, ddof=1), np.var(d, ddof=1) * math.sqrt(2 / (d.size - 1))
    assert abs(var - 1.0) < 3 * se
    assert abs(d.mean()) < 4 / math.sqrt(d.size)


def test_driftless_displacement_has_mean_zero():
    p = ModelParams(a=1.0, gamma=0.0, n_particles=10, dt=1e-2, horizon=1.0)
    ens = simulate_paths(_nu(p), p, [0.0, 1.0], 2000, RngSpec(6))
    d = ens.positions[:, 1].sum(axis=1) - ens.positions[:, 0].sum(axis=1)
    assert abs(d.mean()) < 3 * d.std(ddof=1) / math.sqrt(d.size)


def test_tilde_nu_start_has_lowest_at_zero():
    p = ModelParams(a=1.0, gamma=0.0, n_particles=30, dt=1e-2, horizon=0.1)
    ens = simulate_paths(ProfileSpec(ProfileKind.TILDE_NU, p), p, [0.0, 0.1], 5, RngSpec(7))
    assert np.all(ens.positions[:, 0, 0] == 0.0)
    assert ens.profile is ProfileKind.TILDE_NU


def test_noise_exchangeability_at_zero_drift():
    p = ModelParams(a=1.0, gamma=0.0, n_particles=8, dt=1e-2, horizon=1.0)
    spec = RngSpec(8)
    reps = np.arange(3000)
    x0 = np.tile(np.linspace(0, 1, 8), (reps.size, 1))
    keys = spec.noise_keys(reps, 8)
    perm = np.random.default_rng(0).permutation(8)
    a, _, _ = integrate(x0, keys, 100, p.dt, 0.0, [100], backend="numpy")
    keys_b = RngSpec(9).noise_keys(reps, 8)[:, perm]
    b, _, _ = integrate(x0, keys_b, 100, p.dt, 0.0, [100], backend="numpy")
    for r in (0, 3, 7):
        assert stats.ks_2samp(a[:, 0, r], b[:, 0, r]).pvalue > 0.01


def test_report_flags_binding_truncation():
    p = ModelParams(a=1.0, gamma=0.0, n_particles=3, dt=1e-2, horizon=20.0)
    ens = simulate_paths(_nu(p), p, [20.0], 4, RngSpec(10))
    assert ens.report.argmin_top_fraction > 0
    assert ens.report.warnings and ens.report.k_buffer == 1


def test_report_is_clean_in_a_healthy_run():
    p = ModelParams(a=1.0, gamma=0.0, n_particles=200, dt=1e-3, horizon=0.2)
    ens = simulate_paths(_nu(p), p, [0.2], 4, RngSpec(11))
    assert ens.report.argmin_top_fraction == 0
    assert ens.report.warnings == []
    assert ens.report.to_dict()["k_buffer"] == 20


def test_record_steps_validation():
    assert record_steps_for([0.0, 0.5, 1.0], 0.1).tolist() == [0, 5, 10]
    with pytest.raises(ParameterError):
        record_steps_for([0.5, 0.2], 0.1)
    with pytest.raises(ParameterError):
        record_steps_for([0.10, 0.105], 0.1)
    with pytest.raises(ParameterError):
        record_steps_for([2.0], 0.1, n_max=10)


def test_non_finite_state_raises():
    keys = RngSpec(0).noise_keys([0], 3)
    x0 = np.array([[0.0, np.nan, 1.0]])
    with pytest.raises(IntegrationError):
        integrate(x0, keys, 5, 0.1, 1.0, [5], backend="numpy")


def test_full_path_frames_and_partial_frames():
    p = ModelParams(n_particles=5, dt=0.1, horizon=0.2)
    ens = simulate_paths(_nu(p), p, [0.0, 0.2], 1, RngSpec(12))
    frames = ens.path(0).frames
    assert [f.time for f in frames] == pytest.approx([0.0, 0.2])
    part = simulate_paths(_nu(p), p, [0.2], 1, RngSpec(12), ranks=[0, 2])
    with pytest.raises(Exception):
        part.path(0).frames


def test_gap_series_shape_and_positivity():
    p = ModelParams(a=1.0, gamma=1.0, n_particles=4, dt=1e-2, horizon=5.0)
    t, g = gap_series(p, RngSpec(13), burn_in=1.0, thin=5)
    assert g.shape == (t.size, 3)
    assert t[0] == pytest.approx(1.0) and np.all(g >= 0)
    with pytest.raises(ParameterError):
        gap_series(p, RngSpec(13), burn_in=5.0, thin=1000)


def test_initial_positions_override():
    p = ModelParams(n_particles=3, dt=0.1, horizon=0.1)
    ens = simulate_paths(None, p, [0.0], 2, RngSpec(14), initial_positions=[2.0, 0.0, 1.0])
    assert ens.positions[:, 0].tolist() == [[0.0, 1.0, 2.0]] * 2
    with pytest.raises(ParameterError):
        simulate_paths(None, p, [0.0], 1, RngSpec(14), initial_positions=[0.0])
