import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from atlasfluct.errors import ParameterError, RejectedInputError, SaturationError
from atlasfluct.model import (ModelParams, ParticleConfig, eps_center, eps_shift, rank_positions,
                              tilde_center, y_view)


@pytest.mark.parametrize("kw", [dict(a=0), dict(a=-1), dict(gamma=-0.1), dict(dt=0),
                                dict(horizon=-1), dict(n_particles=0), dict(n_particles=2.5),
                                dict(dt=2.0, horizon=1.0), dict(a=math.nan)])
def test_params_rejected(kw):
    with pytest.raises(ParameterError):
        ModelParams(**kw)


def test_params_steps_and_roundtrip():
    p = ModelParams(dt=1e-3, horizon=1.0)
    assert p.n_steps == 1000
    assert ModelParams(**p.to_dict()) == p
    assert p.with_(gamma=2.0).gamma == 2.0


def test_rank_two_points():
    c = rank_positions([(0, 2.0), (1, 1.0)])
    assert c.positions.tolist() == [1.0, 2.0]
    assert c.order.tolist() == [1, 0]


def test_rank_tie_goes_to_lower_index():
    c = rank_positions([(1, 1.0), (0, 1.0)])
    assert c.order.tolist() == [0, 1]


def test_rank_three_points():
    assert rank_positions([(0, 0.0), (1, -3.0), (2, 5.0)]).positions.tolist() == [-3.0, 0.0, 5.0]


def test_rank_rejects_bad_input():
    with pytest.raises(RejectedInputError):
        rank_positions([0.0, math.inf])
    with pytest.raises(RejectedInputError):
        rank_positions([(0, 1.0), (0, 2.0)])


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=40))
def test_ranking_is_a_stable_sorting_permutation(vals):
    c = rank_positions([float(v) for v in vals])
    assert np.all(np.diff(c.positions) >= 0)
    assert sorted(c.order.tolist()) == list(range(len(vals)))
    assert np.array_equal(c.labeled(), np.array(vals, dtype=float))
    for i in range(len(vals) - 1):
        if c.positions[i] == c.positions[i + 1]:
            assert c.order[i] < c.order[i + 1]


def test_config_is_immutable_and_validated():
    c = ParticleConfig(0.0, [0.0, 1.0])
    with pytest.raises(ValueError):
        c.positions[0] = 5.0
    with pytest.raises(RejectedInputError):
        ParticleConfig(0.0, [1.0, 0.0])
    assert c.gaps().tolist() == [1.0]


@pytest.mark.parametrize("pos,t,a,expect", [([0, 1], 0, 1, [0, 1]), ([0], 2, 1, [1]),
                                            ([-1, 3], 4, 0.5, [0, 4])])
def test_tilde_center(pos, t, a, expect):
    assert tilde_center(ParticleConfig(t, pos), a).positions.tolist() == expect


def test_eps_center_examples():
    assert eps_center(ParticleConfig(0, [0.0]), 0.5, math.exp(-1)).positions[0] == pytest.approx(-1)
    assert eps_center(ParticleConfig(2, [2.0]), 1.0, math.exp(-2)).positions[0] == pytest.approx(2)
    with pytest.raises(ParameterError):
        eps_shift(1.0, 1.0)
    assert -1e-6 < eps_shift(1.0, 1 - 1e-6) < 0


def test_y_view_examples():
    assert y_view(ParticleConfig(0, [0.0]), 1.0).tolist() == [1.0]
    assert y_view(ParticleConfig(0, [0.0, math.log(2)]), 1.0) == pytest.approx([1.0, 2.0])
    assert y_view(ParticleConfig(2, [0.0]), 1.0, eps=0.25)[0] == pytest.approx(0.5 * math.e, rel=1e-14)


def test_y_view_saturation_reports_mask():
    with pytest.raises(SaturationError) as info:
        y_view(ParticleConfig(0, [0.0, 800.0]), 1.0)
    assert info.value.mask.tolist() == [False, True]
