import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from smooth_trajectron.cvae import (
    LOG_2PI,
    CategoricalHead,
    GaussianSteps,
    VelocityDecoder,
    integrate,
    kl_categorical,
    log_prob,
    most_likely_mode,
    predict_most_likely,
    sample_trajectories,
)


def _gauss(mean, sd=1.0):
    mean = np.asarray(mean, dtype=float)
    H = mean.shape[-2]
    return GaussianSteps(mean, np.full(mean.shape, math.log(sd)), np.zeros(mean.shape[:-1]))


def test_integrate_constant_velocity():
    out = integrate(_gauss(np.tile([1.0, 0.0], (4, 1))), [0.0, 0.0], 0.5)
    assert np.allclose(out.mean.numpy(), [[0.5, 0], [1.0, 0], [1.5, 0], [2.0, 0]])


def test_integrate_rest_and_cov():
    out = integrate(_gauss(np.zeros((3, 2))), [2.0, -1.0], 0.5)
    assert np.allclose(out.mean.numpy(), [2.0, -1.0])
    one = integrate(_gauss(np.zeros((1, 2))), [0.0, 0.0], 0.5)
    assert np.allclose(one.cov().numpy()[0], 0.25 * np.eye(2))


def test_log_prob_hand_values():
    g = _gauss(np.zeros((1, 2)))
    assert math.isclose(float(log_prob(g, [[0.0, 0.0]])), -LOG_2PI, abs_tol=1e-12)
    assert math.isclose(float(log_prob(g, [[1.0, 0.0]])), -LOG_2PI - 0.5, abs_tol=1e-12)


def test_log_prob_matches_scipy():
    rng = np.random.default_rng(0)
    mean, ld, off = rng.normal(size=(5, 2)), rng.normal(scale=0.5, size=(5, 2)), rng.normal(size=5)
    g = GaussianSteps(mean, ld, off)
    gt = rng.normal(size=(5, 2))
    cov = g.cov()
    oracle = sum(multivariate_normal(mean[k], cov[k]).logpdf(gt[k]) for k in range(5))
    assert math.isclose(float(log_prob(g, gt)), oracle, rel_tol=1e-12)


def test_from_cov_inverts_chol():
    rng = np.random.default_rng(1)
    g = GaussianSteps(np.zeros((4, 2)), rng.normal(size=(4, 2)), rng.normal(size=4))
    back = GaussianSteps.from_cov(g.mean, g.cov())
    assert np.allclose(back.log_diag, g.log_diag) and np.allclose(back.offdiag, g.offdiag)


def test_categorical_head_zero_logits_uniform():
    head = CategoricalHead(3, 4, 5)
    with torch.no_grad():
        for p in head.parameters():
            p.zero_()
    assert torch.allclose(head(torch.randn(2, 3, dtype=torch.float64)), torch.full((2, 5), 0.2, dtype=torch.float64))


def test_kl_hand_cases():
    assert float(kl_categorical([0.3, 0.7], [0.3, 0.7])) == 0.0
    assert math.isclose(float(kl_categorical([1.0, 0.0], [0.5, 0.5])), math.log(2), abs_tol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 1), min_size=3, max_size=3), st.lists(st.floats(0.01, 1), min_size=3, max_size=3))
def test_kl_nonnegative(q, p):
    q, p = np.array(q) / sum(q), np.array(p) / sum(p)
    assert float(kl_categorical(q, p)) >= -1e-15


def test_most_likely_tie_break():
    assert most_likely_mode([0.5, 0.5]) == 0
    assert most_likely_mode([0.1, 0.9]) == 1


def test_decoder_shapes_deterministic():
    dec = VelocityDecoder(6, 3, 5)
    dec.reset_parameters(torch.Generator().manual_seed(0))
    e_x, z, v0 = torch.randn(2, 6, dtype=torch.float64), torch.eye(3, dtype=torch.float64)[[0, 2]], torch.zeros(2, 2, dtype=torch.float64)
    a, b = dec(e_x, z, v0, 8), dec(e_x, z, v0, 8)
    assert a.mean.shape == (2, 8, 2) and torch.equal(a.mean, b.mean)


def test_sampling_deterministic_and_degenerate_limit():
    vel = GaussianSteps(np.tile([[1.0, 0.0]], (2, 8, 1)) * np.array([1, 3])[:, None, None],
                        np.full((2, 8, 2), math.log(1e-6)), np.zeros((2, 8)))
    a = sample_trajectories([0.0, 1.0], vel, [0.0, 0.0], 0.5, 1000, 7)
    b = sample_trajectories([0.0, 1.0], vel, [0.0, 0.0], 0.5, 1000, 7)
    assert np.array_equal(a, b)
    _, ml = predict_most_likely([0.0, 1.0], vel, [0.0, 0.0], 0.5)
    assert np.abs(a - ml.mean).max() < 1e-3
