"""Exact samplers for the stationary initial profiles.

All samplers are batched over replicas: stream keys come from
:class:`~atlasfluct.rng.RngSpec` with the replica id and the particle slot,
so replica ``r`` gets the same configuration whether it is drawn alone or
as part of a batch.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .errors import ParameterError, RejectedInputError
from .model import ModelParams, ParticleConfig, rank_positions

# counter offset of the shape-boosting uniform, far above any attempt index
_BOOST_COUNTER = 2 ** 40


class ProfileKind(str, enum.Enum):
    NU = "nu"                    # nu_a^gamma
    TILDE_NU = "tilde_nu"        # lowest at 0, gaps pi_a^gamma
    HOMOGENEOUS = "homogeneous"  # Poisson(2 gamma) on [0, inf)
    POISSON = "poisson"          # Poisson with intensity a e^{ax} (nu_a^0)


@dataclass(frozen=True)
class ProfileSpec:
    kind: ProfileKind
    params: ModelParams

    def __post_init__(self):
        object.__setattr__(self, "kind", ProfileKind(self.kind))
        if self.kind is ProfileKind.HOMOGENEOUS and not self.params.gamma > 0:
            raise ParameterError("the homogeneous profile needs gamma > 0")


def gamma_variates(shape: float, keys) -> np.ndarray:
    """One Gamma(shape, 1) draw per stream key (Marsaglia-Tsang).

    Attempt ``k`` of the squeeze/rejection loop reads the normal at counter
    ``2k`` and the uniform at ``2k+1``; for ``shape < 1`` a Gamma(shape+1)
    draw is multiplied by ``U**(1/shape)``.
    """
    if not shape > 0:
        raise ParameterError(f"gamma shape must be positive, got {shape}")
    keys = np.asarray(keys, dtype=np.uint64)
    flat = keys.ravel()
    boost = shape < 1.0
    s = shape + 1.0 if boost else shape
    d = s - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(flat.size)
    todo = np.arange(flat.size)
    attempt = 0
    while todo.size:
        kk = flat[todo]
        x = _rng.normals(kk, 2 * attempt)
        u = _rng.uniforms(kk, 2 * attempt + 1)
        v = 1.0 + c * x
        pos = v > 0
        v3 = np.where(pos, v, 1.0) ** 3
        with np.errstate(divide="ignore"):
            accept = pos & ((u < 1.0 - 0.0331 * x ** 4)
                            | (np.log(u) < 0.5 * x * x + d * (1.0 - v3 + np.log(v3))))
        out[todo[accept]] = d * v3[accept]
        todo = todo[~accept]
        attempt += 1
    if boost:
        u = _rng.uniforms(flat, _BOOST_COUNTER)
        out *= u ** (1.0 / shape)
    return out.reshape(keys.shape)


def sample_gamma_variate(shape: float, rng: _rng.RngSpec, index: int = 0, replica: int = 0) -> float:
    """Single Gamma(shape, 1) draw from the stream ``(replica, index)``."""
    key = rng.keys(replica, index, _rng.PURPOSE_GAMMA)
    return float(gamma_variates(shape, key))


def _exp_gaps(rng, replica_ids, n, rates):
    """``(R, n-1)`` exponential gaps; gap ``i`` (1-based) uses slot ``i``."""
    r = np.asarray(replica_ids, dtype=np.uint64)[:, None]
    i = np.arange(1, n, dtype=np.uint64)[None, :]
    keys = rng.keys(r, i, _rng.PURPOSE_INIT)
    return _rng.exponentials(keys, 0) / np.broadcast_to(rates, (1, n - 1))


def nu_batch(params: ModelParams, n: int, rng: _rng.RngSpec, replica_ids, gamma=None) -> np.ndarray:
    """``(R, n)`` ranked samples of the lowest ``n`` points of nu_a^gamma.

    ``Y_(0)`` is Gamma(1 + 2 gamma / a) and the ``Y``-gaps are iid Exp(1);
    positions are ``log(Y)/a``.
    """
    a = params.a
    g = params.gamma if gamma is None else gamma
    replica_ids = np.atleast_1d(np.asarray(replica_ids, dtype=np.int64))
    y0 = gamma_variates(1.0 + 2.0 * g / a, rng.keys(replica_ids, 0, _rng.PURPOSE_GAMMA))
    y = np.empty((replica_ids.size, n))
    y[:, 0] = y0
    if n > 1:
        y[:, 1:] = y0[:, None] + np.cumsum(_exp_gaps(rng, replica_ids, n, np.ones(n - 1)), axis=1)
    return np.log(y) / a


def tilde_nu_batch(params: ModelParams, n: int, rng: _rng.RngSpec, replica_ids) -> np.ndarray:
    replica_ids = np.atleast_1d(np.asarray(replica_ids, dtype=np.int64))
    x = np.zeros((replica_ids.size, n))
    if n > 1:
        rates = 2.0 * params.gamma + params.a * np.arange(1, n)
        x[:, 1:] = np.cumsum(_exp_gaps(rng, replica_ids, n, rates), axis=1)
    return x


def homogeneous_batch(params: ModelParams, n: int, rng: _rng.RngSpec, replica_ids) -> np.ndarray:
    if not params.gamma > 0:
        raise ParameterError("the homogeneous profile needs gamma > 0")
    replica_ids = np.atleast_1d(np.asarray(replica_ids, dtype=np.int64))
    lam = 2.0 * params.gamma
    x = np.empty((replica_ids.size, n))
    x[:, 0] = _rng.exponentials(rng.keys(replica_ids, 0, _rng.PURPOSE_INIT), 0) / lam
    if n > 1:
        x[:, 1:] = x[:, :1] + np.cumsum(_exp_gaps(rng, replica_ids, n, np.full(n - 1, lam)), axis=1)
    return x


def sample_batch(spec: ProfileSpec, rng: _rng.RngSpec, replica_ids, n: int | None = None) -> np.ndarray:
    """Dispatch on ``spec.kind``; returns ``(R, n)`` ranked positions."""
    n = spec.params.n_particles if n is None else n
    if spec.kind is ProfileKind.NU:
        return nu_batch(spec.params, n, rng, replica_ids)
    if spec.kind is ProfileKind.POISSON:
        return nu_batch(spec.params, n, rng, replica_ids, gamma=0.0)
    if spec.kind is ProfileKind.TILDE_NU:
        return tilde_nu_batch(spec.params, n, rng, replica_ids)
    return homogeneous_batch(spec.params, n, rng, replica_ids)


def _single(batch):
    return ParticleConfig(time=0.0, positions=batch[0])


def sample_nu(params: ModelParams, n: int, rng: _rng.RngSpec, replica: int = 0) -> ParticleConfig:
    return _single(nu_batch(params, n, rng, [replica]))


def sample_tilde_nu(params: ModelParams, n: int, rng: _rng.RngSpec, replica: int = 0) -> ParticleConfig:
    return _single(tilde_nu_batch(params, n, rng, [replica]))


def sample_homogeneous(params: ModelParams, n: int, rng: _rng.RngSpec, replica: int = 0) -> ParticleConfig:
    return _single(homogeneous_batch(params, n, rng, [replica]))


def load_positions_csv(path) -> ParticleConfig:
    """Read raw positions from a CSV with a ``position`` column (header required)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "position" not in rows[0]:
        raise RejectedInputError(f"{path}: expected a header with a 'position' column")
    return rank_positions([float(r["position"]) for r in rows])
