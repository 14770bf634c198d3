"""Domain types and ranking/centering transforms for the Atlas model."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError, RejectedInputError, SaturationError

_EXP_LIMIT = 700.0


def _frozen(arr, dtype=np.float64):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ModelParams:
    """Drift/density parameters plus truncation and discretization controls.

    Attributes
    ----------
    a : float
        Growth rate of the stationary density ``a*exp(a*x)``.
    gamma : float
        Drift received by the lowest particle.
    n_particles : int
        Truncation ``N`` of the infinite system.
    dt : float
        Euler step.
    horizon : float
        Final time ``T``.
    """

    a: float = 1.0
    gamma: float = 0.0
    n_particles: int = 2000
    dt: float = 1e-3
    horizon: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0):
            raise ParameterError(f"a must be positive, got {self.a}")
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ParameterError(f"gamma must be nonnegative, got {self.gamma}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if not (math.isfinite(self.horizon) and self.horizon >= 0):
            raise ParameterError(f"horizon must be nonnegative, got {self.horizon}")
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise ParameterError(f"n_particles must be a positive integer, got {self.n_particles}")
        if self.horizon > 0 and self.dt > self.horizon:
            raise ParameterError("dt must not exceed the horizon")
        object.__setattr__(self, "n_particles", int(self.n_particles))

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.horizon / self.dt + 1e-9))

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {"a": self.a, "gamma": self.gamma, "n_particles": self.n_particles,
                "dt": self.dt, "horizon": self.horizon}


@dataclass(frozen=True)
class ParticleConfig:
    """Ranked positions at one instant.

    ``order[i]`` is the label of the particle holding rank ``i``, so
    ``positions[i] == raw[order[i]]``.
    """

    time: float
    positions: np.ndarray
    order: np.ndarray = field(default=None)

    def __post_init__(self):
        pos = _frozen(self.positions)
        if pos.ndim != 1:
            raise RejectedInputError("positions must be one-dimensional")
        if pos.size > 1 and np.any(np.diff(pos) < 0):
            raise RejectedInputError("positions must be sorted ascending")
        object.__setattr__(self, "positions", pos)
        order = np.arange(pos.size) if self.order is None else self.order
        object.__setattr__(self, "order", _frozen(order, np.int64))
        if self.order.shape != pos.shape:
            raise RejectedInputError("order and positions differ in length")
        if self.time < 0:
            raise RejectedInputError("time must be nonnegative")

    @property
    def n(self) -> int:
        return self.positions.size

    def gaps(self) -> np.ndarray:
        """``Z_i = X_(i) - X_(i-1)`` for ``i = 1..N-1``."""
        return np.diff(self.positions)

    def labeled(self) -> np.ndarray:
        """Positions indexed by particle label instead of rank."""
        out = np.empty_like(self.positions)
        out[self.order] = self.positions
        return out


def rank_positions(raw, time: float = 0.0) -> ParticleConfig:
    """Rank ``(index, position)`` pairs, breaking ties by the lower index.

    ``raw`` may also be a plain sequence of positions, in which case the
    indices are ``0..n-1``.
    """
    items = list(raw)
    if items and np.ndim(items[0]) == 1:
        idx = np.array([int(i) for i, _ in items], dtype=np.int64)
        pos = np.array([float(p) for _, p in items], dtype=np.float64)
    else:
        pos = np.asarray(items, dtype=np.float64)
        idx = np.arange(pos.size, dtype=np.int64)
    if not np.all(np.isfinite(pos)):
        raise RejectedInputError("non-finite position")
    if np.unique(idx).size != idx.size:
        raise RejectedInputError("duplicate particle index")
    perm = np.lexsort((idx, pos))
    return ParticleConfig(time=time, positions=pos[perm], order=idx[perm])


def tilde_center(config: ParticleConfig, a: float) -> ParticleConfig:
    """Shift by ``a*t/2``: the frame in which the profile is stationary."""
    shift = 0.5 * a * config.time
    return replace(config, positions=config.positions + shift)


def eps_shift(a: float, eps: float) -> float:
    if not 0.0 < eps < 1.0:
        raise ParameterError(f"eps must lie in (0, 1), got {eps}")
    return math.log(eps) / (2.0 * a)


def eps_center(config: ParticleConfig, a: float, eps: float) -> ParticleConfig:
    """``X + a*t/2 + log(eps)/(2a)``."""
    shift = eps_shift(a, eps)
    out = tilde_center(config, a)
    return replace(out, positions=out.positions + shift)


def y_values(positions, times, a: float, eps: float | None = None):
    """Array form of :func:`y_view`; ``times`` broadcasts against ``positions``."""
    expo = a * (np.asarray(positions, dtype=float) + 0.5 * a * np.asarray(times, dtype=float))
    bad = expo > _EXP_LIMIT
    if np.any(bad):
        raise SaturationError(f"{int(bad.sum())} entries overflow exp(a*(x + a*t/2))", mask=bad)
    y = np.exp(expo)
    if eps is not None:
        y = math.sqrt(eps) * y
    return y


def y_view(config: ParticleConfig, a: float, eps: float | None = None) -> np.ndarray:
    """``exp(a*(X_(i) + a*t/2))``, scaled by ``sqrt(eps)`` when given."""
    if eps is not None and not eps > 0:
        raise ParameterError("eps must be positive")
    return y_values(config.positions, config.time, a, eps)


@dataclass(frozen=True)
class SimPath:
    """One replica recorded on a time grid.

    ``positions`` has shape ``(len(times), len(ranks))`` and holds the ranked
    values ``X_(ranks[j])(times[k])``.  When every rank is recorded the
    frames are full :class:`ParticleConfig` objects.
    """

    params: ModelParams
    times: np.ndarray
    positions: np.ndarray
    ranks: np.ndarray
    seed: int
    replica_id: int

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen(self.times))
        object.__setattr__(self, "positions", _frozen(self.positions))
        object.__setattr__(self, "ranks", _frozen(self.ranks, np.int64))
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise RejectedInputError("times must be strictly increasing")

    @property
    def is_full(self) -> bool:
        return self.ranks.size == self.params.n_particles

    @property
    def frames(self) -> list[ParticleConfig]:
        if not self.is_full:
            raise RejectedInputError("only a subset of ranks was recorded")
        return [ParticleConfig(time=float(t), positions=p) for t, p in zip(self.times, self.positions)]
