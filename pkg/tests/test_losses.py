import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smooth_trajectron.exceptions import ConfigurationError, ValidationError
from smooth_trajectron.losses import TV_EPS, LossConfig, attention_tv, elbo_loss, smooth_loss, total_loss

FLIP = np.array([[[1.0, 0.0], [0.0, 1.0]]])


def test_constant_attention_near_zero():
    alpha = np.full((3, 6, 2), 0.5)
    assert float(smooth_loss(alpha)) <= math.sqrt(TV_EPS) * 3 * 5 + 1e-15


def test_single_flip_sqrt2():
    assert math.isclose(float(smooth_loss(FLIP)), math.sqrt(2), abs_tol=1e-6)


def test_two_agents_additive():
    assert math.isclose(float(smooth_loss(np.concatenate([FLIP, FLIP]))), 2 * math.sqrt(2), abs_tol=1e-6)


def test_ragged_k_rejected():
    with pytest.raises(ValidationError):
        smooth_loss([np.array([[1.0, 0.0], [0.5, 0.5]]), np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])])


def test_attention_tv_per_agent():
    tv = attention_tv(np.concatenate([FLIP, np.full((1, 2, 2), 0.5)]))
    assert np.allclose(tv, [math.sqrt(2), 0.0], atol=1e-5)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (2, 5, 3), elements=st.floats(0, 1)))
def test_smooth_nonnegative_and_matches_numpy(alpha):
    oracle = np.sqrt((np.diff(alpha, axis=1) ** 2).sum(-1) + TV_EPS).sum()
    assert math.isclose(float(smooth_loss(alpha)), oracle, rel_tol=1e-12)


def test_elbo_direct():
    assert float(elbo_loss(torch.tensor(-2.0), torch.tensor(0.0))) == 2.0


def test_total_loss_cases():
    l0, sm = torch.tensor(2.0, dtype=torch.float64), torch.tensor(3.0, dtype=torch.float64)
    assert math.isclose(float(total_loss(l0, sm, LossConfig(0.1)).total), 2.3, abs_tol=1e-12)
    assert total_loss(l0, sm, LossConfig(0.0)).total is l0
    assert float(total_loss(l0, torch.tensor(0.0), LossConfig(10.0)).total) == 2.0


def test_negative_beta_rejected():
    with pytest.raises(ConfigurationError):
        LossConfig(-0.1)
