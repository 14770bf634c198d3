"""Euler-Maruyama integration of the truncated rank-based system.

The state is kept in label order (label = rank at time 0).  Each step the
current minimum (lowest label on ties) receives the drift ``gamma*dt`` and
every particle an independent ``N(0, dt)`` increment drawn from its own
counter-based stream at counter ``step_index``.  Ranked frames are produced
only at recording steps.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from . import rng as _rng
from ._accel import optional_njit
from .errors import IntegrationError, ParameterError
from .model import ModelParams, ParticleConfig, SimPath
from .samplers import ProfileKind, ProfileSpec, sample_batch

log = logging.getLogger(__name__)

try:
    from numba import prange
except ImportError:  # pragma: no cover
    prange = range

# beyond this many tracked ranks a full sort beats repeated selection
_SELECT_MAX = 8


@dataclass
class IntegratorReport:
    """Truncation-validity diagnostics aggregated over replicas."""

    argmin_top_fraction: float
    max_position_drift: float
    steps: int
    k_buffer: int
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {"argmin_top_fraction": self.argmin_top_fraction,
                "max_position_drift": self.max_position_drift,
                "steps": self.steps, "k_buffer": self.k_buffer,
                "warnings": list(self.warnings)}


@optional_njit(inline="always")
def _record(x, out_row, ranks, full):
    if full:
        out_row[:] = np.sort(x)
    elif ranks.size <= _SELECT_MAX:
        for j in range(ranks.size):
            out_row[j] = np.partition(x, ranks[j])[ranks[j]]
    else:
        s = np.sort(x)
        for j in range(ranks.size):
            out_row[j] = s[ranks[j]]


@optional_njit(parallel=True, cache=True)
def _euler_numba(x0, keys, n_steps, sd, drift, record_steps, ranks, full, top_label,
                 out, top_counts, max_disp):
    n_rep, n = x0.shape
    n_rec = record_steps.size
    for r in prange(n_rep):
        x = x0[r].copy()
        kr = keys[r]
        rec = 0
        while rec < n_rec and record_steps[rec] == 0:
            _record(x, out[r, rec], ranks, full)
            rec += 1
        amin = np.argmin(x)
        top = 0
        for s in range(n_steps):
            if amin >= top_label:
                top += 1
            x[amin] += drift
            st = np.uint64(s)
            for i in range(n):
                x[i] += sd * _rng.stream_normal(kr[i], st)
            amin = np.argmin(x)
            while rec < n_rec and record_steps[rec] == s + 1:
                _record(x, out[r, rec], ranks, full)
                rec += 1
        top_counts[r] = top
        m = 0.0
        for i in range(n):
            d = abs(x[i] - x0[r, i])
            if not d <= m:  # also propagates NaN
                m = d
        max_disp[r] = m


def _euler_numpy(x0, keys, n_steps, sd, drift, record_steps, ranks, full, top_label,
                 out, top_counts, max_disp):
    x = x0.copy()
    rows = np.arange(x.shape[0])
    rec = 0

    def record():
        s = np.sort(x, axis=1)
        out[:, rec] = s if full else s[:, ranks]

    while rec < record_steps.size and record_steps[rec] == 0:
        record()
        rec += 1
    amin = np.argmin(x, axis=1)
    top = np.zeros(x.shape[0], dtype=np.int64)
    for s in range(n_steps):
        top += amin >= top_label
        x[rows, amin] += drift
        x += sd * _rng.normals(keys, np.uint64(s))
        amin = np.argmin(x, axis=1)
        while rec < record_steps.size and record_steps[rec] == s + 1:
            record()
            rec += 1
    top_counts[:] = top
    max_disp[:] = np.abs(x - x0).max(axis=1)


def integrate(x0, keys, n_steps, dt, gamma, record_steps, ranks=None, k_buffer=None,
              backend=None, workers=None):
    """Low-level driver over ``(R, N)`` initial positions and noise keys.

    Returns ``(frames, top_counts, max_disp)`` with ``frames`` of shape
    ``(R, len(record_steps), K)``.
    """
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    n_rep, n = x0.shape
    ranks = np.arange(n) if ranks is None else np.asarray(ranks, dtype=np.int64)
    if ranks.size and (ranks.min() < 0 or ranks.max() >= n):
        raise ParameterError("recorded ranks must lie in [0, N)")
    full = bool(ranks.size == n and np.array_equal(ranks, np.arange(n)))
    record_steps = np.asarray(record_steps, dtype=np.int64)
    k_buffer = max(1, math.ceil(n / 10)) if k_buffer is None else int(k_buffer)
    out = np.empty((n_rep, record_steps.size, ranks.size))
    top_counts = np.zeros(n_rep, dtype=np.int64)
    max_disp = np.zeros(n_rep)
    args = (x0, np.ascontiguousarray(keys, dtype=np.uint64), int(n_steps), math.sqrt(dt),
            gamma * dt, record_steps, ranks, full, n - k_buffer, out, top_counts, max_disp)
    backend = backend or ("numba" if _accel.USE_NUMBA else "numpy")
    if backend == "numba":
        _accel.set_workers(workers)
        _euler_numba(*args)
    elif backend == "numpy":
        _euler_numpy(*args)
    else:
        raise ParameterError(f"unknown backend {backend!r}")
    if not (np.all(np.isfinite(out)) and np.all(np.isfinite(max_disp))):
        raise IntegrationError("non-finite state produced by the integrator")
    return out, top_counts, max_disp


def euler_step(config: ParticleConfig, params: ModelParams, rng: _rng.RngSpec,
               step_index: int, replica: int = 0) -> ParticleConfig:
    """Advance one ranked configuration by ``params.dt``.

    Particle labels (``config.order``) select the noise streams, so a chain
    of ``euler_step`` calls reproduces :func:`simulate_paths` exactly.
    """
    labels = config.order
    x = config.positions.copy()
    x[0] += params.gamma * params.dt
    keys = rng.keys(replica, labels, _rng.PURPOSE_NOISE)
    x += math.sqrt(params.dt) * _rng.normals(keys, np.uint64(step_index))
    if not np.all(np.isfinite(x)):
        raise IntegrationError("non-finite increment")
    perm = np.lexsort((labels, x))
    return ParticleConfig(time=config.time + params.dt, positions=x[perm], order=labels[perm])


def record_steps_for(times, dt, n_max=None):
    """Grid steps at or just below each record time."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ParameterError("record_times must be a non-empty 1-d sequence")
    if np.any(times < 0) or np.any(np.diff(times) <= 0):
        raise ParameterError("record_times must be nonnegative and strictly increasing")
    steps = np.floor(times / dt + 1e-9).astype(np.int64)
    if np.any(np.diff(steps) <= 0):
        raise ParameterError("two record times fall in the same Euler step")
    if n_max is not None and steps[-1] > n_max:
        raise ParameterError("record_times extend beyond the horizon")
    return steps


@dataclass
class PathEnsemble:
    """Replica-indexed recordings: ``positions[r, k, j] = X_(ranks[j])(times[k])``."""

    params: ModelParams
    times: np.ndarray
    positions: np.ndarray
    ranks: np.ndarray
    seed: int
    replica_ids: np.ndarray
    report: IntegratorReport
    profile: ProfileKind | None = None

    def __len__(self):
        return self.positions.shape[0]

    def path(self, r: int) -> SimPath:
        return SimPath(params=self.params, times=self.times, positions=self.positions[r],
                       ranks=self.ranks, seed=self.seed, replica_id=int(self.replica_ids[r]))

    @property
    def paths(self) -> list[SimPath]:
        return [self.path(r) for r in range(len(self))]


def simulate_paths(initial: ProfileSpec, params: ModelParams, record_times, replicas: int,
                   rng: _rng.RngSpec, *, replica_offset: int = 0, ranks=None,
                   k_buffer=None, backend=None, workers=None, initial_positions=None) -> PathEnsemble:
    """Sample initial configurations and integrate ``replicas`` paths.

    ``ranks`` restricts recording to selected ranks (all by default).
    ``initial_positions`` (``(N,)`` array) overrides the profile sampler and
    starts every replica from the same configuration.
    """
    if replicas < 1:
        raise ParameterError("replicas must be at least 1")
    steps = record_steps_for(record_times, params.dt, params.n_steps)
    n_steps = int(steps[-1])
    rep_ids = np.arange(replica_offset, replica_offset + replicas, dtype=np.int64)
    if initial_positions is not None:
        x0 = np.sort(np.asarray(initial_positions, dtype=float))
        if x0.size != params.n_particles:
            raise ParameterError("initial_positions length differs from n_particles")
        x0 = np.tile(x0, (replicas, 1))
    else:
        x0 = sample_batch(initial, rng, rep_ids, params.n_particles)
    keys = rng.noise_keys(rep_ids, params.n_particles)
    frames, top, disp = integrate(x0, keys, n_steps, params.dt, params.gamma, steps,
                                  ranks=ranks, k_buffer=k_buffer, backend=backend, workers=workers)
    kb = max(1, math.ceil(params.n_particles / 10)) if k_buffer is None else int(k_buffer)
    frac = float(top.sum()) / (replicas * n_steps) if n_steps else 0.0
    report = IntegratorReport(argmin_top_fraction=frac, max_position_drift=float(disp.max()),
                              steps=n_steps, k_buffer=kb)
    if frac > 0:
        msg = (f"truncation binds: minimum held by one of the top {kb} labels in "
               f"{frac:.3g} of steps")
        report.warnings.append(msg)
        log.warning(msg)
    rk = np.arange(params.n_particles) if ranks is None else np.asarray(ranks, dtype=np.int64)
    return PathEnsemble(params=params, times=steps * params.dt, positions=frames, ranks=rk,
                        seed=rng.master_seed, replica_ids=rep_ids, report=report,
                        profile=None if initial is None else initial.kind)


def gap_series(params: ModelParams, rng: _rng.RngSpec, burn_in: float, thin: int = 10,
               initial: ProfileSpec | None = None, replica: int = 0, backend=None):
    """Long single-replica run recording ranked gaps every ``thin`` steps.

    Returns ``(times, gaps)`` with ``gaps`` of shape ``(n_samples, N-1)``,
    sampled from ``burn_in`` to ``params.horizon``.
    """
    if initial is None:
        kind = ProfileKind.HOMOGENEOUS if params.gamma > 0 else ProfileKind.TILDE_NU
        initial = ProfileSpec(kind, params)
    first = math.ceil(burn_in / params.dt - 1e-9)
    steps = np.arange(first, params.n_steps + 1, thin, dtype=np.int64)
    if steps.size < 2:
        raise ParameterError("burn-in leaves fewer than two samples")
    x0 = sample_batch(initial, rng, [replica], params.n_particles)
    keys = rng.noise_keys([replica], params.n_particles)
    frames, _, _ = integrate(x0, keys, int(steps[-1]), params.dt, params.gamma, steps,
                             k_buffer=params.n_particles, backend=backend)
    return steps * params.dt, np.diff(frames[0], axis=1)
