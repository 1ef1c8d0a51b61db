import numpy as np
import pytest
import torch
from sklearn.base import clone

from smooth_trajectron import SmoothTrajectron
from smooth_trajectron.exceptions import ConfigurationError, NumericError, ValidationError
from smooth_trajectron.losses import LossConfig
from smooth_trajectron.model import TensorBatch

from conftest import TINY


def test_get_params_and_clone():
    est = SmoothTrajectron(beta=0.5, **TINY)
    assert clone(est).get_params() == est.get_params()
    assert est.get_params()["beta"] == 0.5


@pytest.mark.parametrize("bad", [dict(beta=-1), dict(horizon=0), dict(n_input=0), dict(learning_rate=-1e-3),
                                 dict(n_modes=0), dict(batch_size=0)])
def test_invalid_params(bad, urban_small):
    with pytest.raises(ConfigurationError):
        SmoothTrajectron(**bad).fit(urban_small)


def test_fit_rejects_non_scene_input():
    with pytest.raises(ValidationError):
        SmoothTrajectron().fit(np.zeros((3, 4)))


def test_predict_outputs(fitted_tiny, urban_small):
    preds = fitted_tiny.predict(urban_small.subset([0]), n_samples=5, seed=1)
    assert preds and all(p.trajectory.shape == (8, 2) and p.samples.shape == (5, 8, 2) for p in preds)
    again = fitted_tiny.predict(urban_small.subset([0]), n_samples=5, seed=1)
    assert all(np.array_equal(a.samples, b.samples) for a, b in zip(preds, again))
    assert all(np.isclose(p.z_dist.sum(), 1.0) for p in preds)


def test_units_consistent(fitted_tiny, urban_small):
    m = fitted_tiny.predict(urban_small.subset([1]))
    s = fitted_tiny.predict(urban_small.subset([1]), units="standardized")
    back = fitted_tiny.standardizer_.inverse_positions(s[0].trajectory)
    assert np.allclose(back, m[0].trajectory, atol=1e-9)


def test_attention_traces_normalized(fitted_tiny, urban_small):
    traces = fitted_tiny.attention_traces(urban_small.subset([0]))
    assert all(np.allclose(t.alpha.sum(-1), 1.0) for t in traces)
    assert fitted_tiny.attention_tv(urban_small) >= 0


def test_score_is_negative_ade(fitted_tiny, urban_small):
    assert fitted_tiny.score(urban_small) < 0


def test_nonfinite_loss_names_terms(fitted_tiny, urban_small):
    net = fitted_tiny.build_net(0.5)
    with torch.no_grad():
        net.decoder.head.bias.fill_(float("nan"))
    batch = TensorBatch.from_samples(fitted_tiny.samples_from(urban_small.subset([0])))
    with pytest.raises(NumericError, match="nll"):
        net.loss(batch, LossConfig(1.0))
