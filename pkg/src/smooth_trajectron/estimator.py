"""Scikit-learn style estimator wrapping the network, standardizer and training loop."""

from __future__ import annotations

import logging
import time

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .cvae import GaussianSteps, LatentConfig, OutputMode, PredictionOutput, integrate, sample_trajectories
from .encoder import CELL_TYPE, AttentionTrace, EncoderConfig
from .exceptions import ConfigurationError, NumericError, ValidationError
from .features import SampleBatch, extract_samples
from .losses import LossConfig, attention_tv
from .model import SmoothTrajectronNet, TensorBatch
from .scenes.standardize import Standardizer
from .scenes.types import AgentClass, Scene, SceneSet

log = logging.getLogger(__name__)

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
HISTORY_COLUMNS = ("epoch", "nll", "kl", "smooth", "l0", "total")
_INFER_CHUNK = 1024


def check_scene_set(X) -> SceneSet:
    """Accept a SceneSet, a Scene or a sequence of Scenes; require one shared dt."""
    if isinstance(X, Scene):
        X = SceneSet([X])
    elif not isinstance(X, SceneSet):
        items = list(X) if hasattr(X, "__iter__") else None
        if items is None or not all(isinstance(s, Scene) for s in items):
            raise ValidationError(f"expected scenes, got {type(X).__name__}")
        X = SceneSet(items)
    if len(X) == 0:
        raise ValidationError("expected at least one scene")
    dts = {s.dt for s in X}
    if len(dts) != 1:
        raise ValidationError(f"scenes mix time steps {sorted(dts)}")
    return X


class SmoothTrajectron(BaseEstimator):
    """Trajectory forecaster with per-step class attention and a smoothness penalty.

    ``beta`` weights the temporal total-variation penalty on attention;
    ``beta=0`` is the unpenalised base model. ``smooth_term=False`` removes
    the penalty from the objective entirely. History uses
    ``history_steps + 1`` frames of which the last ``n_input`` (default all)
    are observed.

    Fitted attributes: ``standardizer_``, ``net_``, ``history_`` (per-epoch
    loss terms), ``epoch_seconds_``, ``dt_``, ``val_loss_``.
    """

    def __init__(
        self,
        beta=0.0,
        kl_weight=1.0,
        history_steps=9,
        n_input=None,
        horizon=8,
        hidden_dim=32,
        edge_hidden_dim=16,
        attention_dim=16,
        future_dim=16,
        latent_hidden_dim=32,
        decoder_dim=32,
        n_modes=5,
        learning_rate=3e-3,
        epochs=30,
        batch_size=64,
        clip_norm=None,
        radius_vehicle=20.0,
        radius_pedestrian=10.0,
        sample_stride=3,
        n_samples=200,
        smooth_term=True,
        random_state=0,
        verbose=0,
    ):
        self.beta = beta
        self.kl_weight = kl_weight
        self.history_steps = history_steps
        self.n_input = n_input
        self.horizon = horizon
        self.hidden_dim = hidden_dim
        self.edge_hidden_dim = edge_hidden_dim
        self.attention_dim = attention_dim
        self.future_dim = future_dim
        self.latent_hidden_dim = latent_hidden_dim
        self.decoder_dim = decoder_dim
        self.n_modes = n_modes
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.clip_norm = clip_norm
        self.radius_vehicle = radius_vehicle
        self.radius_pedestrian = radius_pedestrian
        self.sample_stride = sample_stride
        self.n_samples = n_samples
        self.smooth_term = smooth_term
        self.random_state = random_state
        self.verbose = verbose

    # -- configuration -------------------------------------------------
    def _check_params(self):
        def req(cond, name, msg):
            if not cond:
                raise ConfigurationError(f"{name}: {msg}", field=name)

        req(self.beta >= 0, "beta", "must be >= 0")
        req(self.kl_weight >= 0, "kl_weight", "must be >= 0")
        req(self.history_steps >= 1, "history_steps", "must be >= 1")
        req(self.horizon >= 1, "horizon", "must be >= 1")
        n_in = self.history_steps + 1 if self.n_input is None else self.n_input
        req(1 <= n_in <= self.history_steps + 1, "n_input", f"must lie in [1, {self.history_steps + 1}]")
        req(self.learning_rate >= 0, "learning_rate", "must be >= 0")
        req(self.epochs >= 0, "epochs", "must be >= 0")
        req(self.batch_size >= 1, "batch_size", "must be >= 1")
        req(self.n_modes >= 1, "n_modes", "must be >= 1")
        req(self.sample_stride >= 1, "sample_stride", "must be >= 1")
        req(self.n_samples >= 1, "n_samples", "must be >= 1")
        req(self.clip_norm is None or self.clip_norm > 0, "clip_norm", "must be > 0 or None")
        for name in ("hidden_dim", "edge_hidden_dim", "attention_dim", "future_dim",
                     "latent_hidden_dim", "decoder_dim"):
            req(getattr(self, name) >= 1, name, "must be >= 1")

    @property
    def radius(self) -> dict:
        return {AgentClass.VEHICLE: float(self.radius_vehicle), AgentClass.PEDESTRIAN: float(self.radius_pedestrian)}

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(self.history_steps, self.hidden_dim, self.edge_hidden_dim,
                             self.attention_dim, cell_type=CELL_TYPE)

    def latent_config(self) -> LatentConfig:
        return LatentConfig(self.n_modes, self.future_dim, self.latent_hidden_dim, self.decoder_dim)

    def build_net(self, dt: float) -> SmoothTrajectronNet:
        return SmoothTrajectronNet(self.encoder_config(), self.latent_config(), self.horizon, dt).reset_parameters(
            self.random_state
        )

    def samples_from(self, X, require_future=True, standardized=False) -> SampleBatch:
        """Cut model samples from raw (meter) scenes, or already standardized ones."""
        X = check_scene_set(X)
        if not standardized:
            X = self.standardizer_.transform(X)
        return extract_samples(X, self.history_steps, self.horizon, self.n_input, self.radius,
                               self.sample_stride, require_future)

    # -- training ------------------------------------------------------
    def fit(self, X, y=None, X_val=None):
        """Fit on scenes ``X`` (meters). ``y`` is ignored; futures come from the tracks."""
        self._check_params()
        X = check_scene_set(X)
        self.dt_ = X[0].dt
        self.standardizer_ = Standardizer().fit(X)
        train = self.samples_from(X)
        if len(train) == 0:
            raise ValidationError("no eligible (focal agent, frame) samples in the training scenes")
        torch.manual_seed(self.random_state)
        self.net_ = self.build_net(self.dt_).fit_scales(TensorBatch.from_samples(train))
        self.history_ = []
        self.epoch_seconds_ = []
        self.n_train_samples_ = len(train)
        self._run_epochs(train, self.epochs)
        val = self.samples_from(X_val) if X_val is not None else train
        self.val_loss_ = self.loss_on(val) if len(val) else float("nan")
        return self

    def _run_epochs(self, samples: SampleBatch, epochs: int):
        cfg = LossConfig(self.beta, self.kl_weight)
        opt = torch.optim.Adam(self.net_.parameters(), lr=self.learning_rate, betas=ADAM_BETAS, eps=ADAM_EPS)
        rng = np.random.default_rng(self.random_state)
        n = len(samples)
        for epoch in range(1, epochs + 1):
            start = time.perf_counter()
            order = rng.permutation(n)
            sums = dict.fromkeys(HISTORY_COLUMNS[1:], 0.0)
            n_batches = 0
            for b, lo in enumerate(range(0, n, self.batch_size)):
                batch = TensorBatch.from_samples(samples.subset(order[lo : lo + self.batch_size]))
                try:
                    out, _ = self.net_.loss(batch, cfg, self.smooth_term)
                except NumericError as exc:
                    raise NumericError(f"epoch {epoch}, batch {b}: {exc}") from None
                opt.zero_grad()
                out.total.backward()
                if self.clip_norm is not None:
                    torch.nn.utils.clip_grad_norm_(self.net_.parameters(), self.clip_norm)
                opt.step()
                for k, v in out.as_floats().items():
                    if k in sums:
                        sums[k] += v
                n_batches += 1
            row = {"epoch": epoch, **{k: v / n_batches for k, v in sums.items()}}
            self.history_.append(row)
            self.epoch_seconds_.append(time.perf_counter() - start)
            if self.verbose:
                log.info("epoch %d total %.6f (%.2fs)", epoch, row["total"], self.epoch_seconds_[-1])

    def loss_on(self, samples: SampleBatch) -> float:
        """Objective over ``samples`` taken as a single batch (no parameter update)."""
        check_is_fitted(self, "net_")
        with torch.no_grad():
            out, _ = self.net_.loss(TensorBatch.from_samples(samples), LossConfig(self.beta, self.kl_weight),
                                    self.smooth_term)
        return float(out.total)

    def validation_loss(self, X) -> float:
        return self.loss_on(self.samples_from(X))

    # -- inference -----------------------------------------------------
    def _infer(self, samples: SampleBatch):
        probs, means, logd, offs, alphas = [], [], [], [], []
        for lo in range(0, len(samples), _INFER_CHUNK):
            tb = TensorBatch.from_samples(samples.subset(slice(lo, lo + _INFER_CHUNK)))
            p, vel, alpha = self.net_.infer(tb)
            probs.append(p.numpy())
            means.append(vel.mean.numpy())
            logd.append(vel.log_diag.numpy())
            offs.append(vel.offdiag.numpy())
            alphas.append(alpha.numpy())
        Z, H = self.n_modes, self.horizon
        if not probs:
            return np.zeros((0, Z)), GaussianSteps(np.zeros((0, Z, H, 2)), np.zeros((0, Z, H, 2)), np.zeros((0, Z, H))), None
        vel = GaussianSteps(np.concatenate(means), np.concatenate(logd), np.concatenate(offs))
        return np.concatenate(probs), vel, np.concatenate(alphas)

    def _to_meters(self, dist: GaussianSteps) -> GaussianSteps:
        s = self.standardizer_.scale_
        return GaussianSteps(
            self.standardizer_.inverse_positions(dist.mean),
            dist.log_diag + np.log(s),
            dist.offdiag * s[1],
        )

    def predict(self, X, n_samples=0, seed=0, units="meters", require_future=False):
        """Most-likely forecasts for every eligible focal agent and frame.

        Returns a list of :class:`PredictionOutput`. With ``n_samples > 0``
        each output also carries sampled trajectories (seeded by ``seed``).
        ``units`` is ``"meters"`` or ``"standardized"``.
        """
        check_is_fitted(self, "net_")
        if units not in ("meters", "standardized"):
            raise ValueError("units must be 'meters' or 'standardized'")
        samples = self.samples_from(X, require_future=require_future)
        probs, vel, _ = self._infer(samples)
        rng = np.random.default_rng(seed)
        out = []
        for i in range(len(samples)):
            z = int(np.argmax(probs[i]))
            x_t = samples.x_t[i, :2]
            pos = integrate(vel[i][z], x_t, self.dt_).numpy()
            draws = None
            if n_samples:
                draws = sample_trajectories(probs[i], vel[i], x_t, self.dt_, n_samples, rng)
            if units == "meters":
                pos = self._to_meters(pos)
                if draws is not None:
                    draws = self.standardizer_.inverse_positions(draws)
            out.append(PredictionOutput(
                int(samples.scene_id[i]), int(samples.agent_id[i]), int(samples.frame[i]),
                int(samples.focal_class[i]), pos, probs[i],
                OutputMode.SAMPLED if n_samples else OutputMode.MOST_LIKELY, draws,
            ))
        return out

    def attention_traces(self, X, require_future=False) -> list:
        check_is_fitted(self, "net_")
        samples = self.samples_from(X, require_future=require_future)
        _, _, alpha = self._infer(samples)
        if alpha is None:
            return []
        return [AttentionTrace(alpha[i], samples.key_present[i]) for i in range(len(samples))]

    def attention_tv(self, X, require_future=False) -> float:
        """Mean over focal agents of the summed step-to-step attention change."""
        traces = self.attention_traces(X, require_future)
        if not traces:
            raise ValidationError("no eligible focal agents")
        return float(attention_tv(np.stack([t.alpha for t in traces])).mean())

    def score(self, X, y=None):
        """Negative mean most-likely ADE (meters) over the full horizon."""
        preds = self.predict(X, require_future=True)
        gt = self.ground_truth(X, preds)
        return -float(np.mean([np.linalg.norm(p.trajectory - g, axis=-1).mean() for p, g in zip(preds, gt)]))

    @staticmethod
    def ground_truth(X, preds, standardizer=None):
        """Future positions matching each prediction's (scene, agent, frame)."""
        X = check_scene_set(X)
        by_id = {s.scene_id: s for s in X}
        out = []
        for p in preds:
            scene = by_id[p.scene_id]
            tr = scene.track(p.agent_id)
            step = scene.frame_step
            pos = np.stack([tr.state_at(p.frame + k * step)[:2] for k in range(1, p.horizon + 1)])
            out.append(standardizer.transform_positions(pos) if standardizer is not None else pos)
        return out

    @property
    def n_parameters_(self) -> int:
        check_is_fitted(self, "net_")
        return self.net_.n_parameters()
