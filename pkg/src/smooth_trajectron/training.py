"""Training entry point, checkpoints, gradient verification, evaluation tables."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from . import config as flatconfig
from .encoder import CELL_TYPE
from .estimator import HISTORY_COLUMNS, SmoothTrajectron, check_scene_set
from .exceptions import ConfigurationError, ValidationError
from .losses import LossConfig
from .metrics import ade, auc, fde, gap_acceptance_score, kde_nll
from .model import TensorBatch
from .scenes.generate import EGO_AGENT_ID
from .scenes.standardize import Standardizer
from .scenes.types import AgentClass, DataSplit, SceneSet

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = "smooth-trajectron-checkpoint/1"
RESULTS_HEADER = ["model", "beta", "split", "metric", "horizon_s", "value", "seed"]
METRICS = ("fde", "ade", "kde_nll", "auc")
DEFAULT_HORIZONS_S = (1.0, 2.0, 3.0, 4.0)


def check_cell_type(value, source) -> None:
    """Configs record the recurrent cell; only the built-in one can be loaded."""
    if value != CELL_TYPE:
        raise ConfigurationError(f"{source}: cell_type {value!r} is not supported (expected {CELL_TYPE!r})",
                                 field="cell_type")


def train_config_keys() -> list:
    return sorted(SmoothTrajectron().get_params())


def train(config: dict, scenes: SceneSet, split: DataSplit = None) -> SmoothTrajectron:
    """Fit a model with ``config`` (estimator parameters) on ``split.train``.

    Validation loss is taken on ``split.val`` when nonempty, else on train.
    """
    unknown = set(config) - set(train_config_keys())
    if unknown:
        raise ConfigurationError(f"unknown training keys {sorted(unknown)}", field=sorted(unknown)[0])
    scenes = check_scene_set(scenes)
    train_idx = range(len(scenes)) if split is None else split.train
    if not train_idx:
        raise ValidationError("training split is empty")
    train_set = scenes.subset(train_idx)
    val_set = scenes.subset(split.val) if split is not None and split.val else None
    return SmoothTrajectron(**config).fit(train_set, X_val=val_set)


# -- checkpoints ---------------------------------------------------------


@dataclass
class Checkpoint:
    params: dict
    config: dict
    epoch: int
    history: list
    epoch_seconds: list
    val_loss: float
    dt: float
    standardizer_mean: np.ndarray
    standardizer_scale: np.ndarray
    version: str = CHECKPOINT_VERSION
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_estimator(cls, est: SmoothTrajectron) -> "Checkpoint":
        return cls(
            params={k: v.detach().numpy().copy() for k, v in est.net_.state_dict().items()},
            config=est.get_params(),
            epoch=len(est.history_),
            history=[dict(r) for r in est.history_],
            epoch_seconds=list(est.epoch_seconds_),
            val_loss=float(est.val_loss_),
            dt=float(est.dt_),
            standardizer_mean=est.standardizer_.mean_.copy(),
            standardizer_scale=est.standardizer_.scale_.copy(),
        )

    def to_estimator(self) -> SmoothTrajectron:
        est = SmoothTrajectron(**self.config)
        est.dt_ = self.dt
        st = Standardizer()
        st.mean_, st.scale_ = np.asarray(self.standardizer_mean), np.asarray(self.standardizer_scale)
        st.degenerate_ = st.scale_ <= 1e-6
        est.standardizer_ = st
        est.net_ = est.build_net(self.dt)
        est.net_.load_state_dict({k: torch.as_tensor(v) for k, v in self.params.items()})
        est.history_ = [dict(r) for r in self.history]
        est.epoch_seconds_ = list(self.epoch_seconds)
        est.val_loss_ = self.val_loss
        return est

    def same_state(self, other: "Checkpoint") -> bool:
        """Equality ignoring wall-clock timings."""
        return (
            self.config == other.config
            and self.epoch == other.epoch
            and self.history == other.history
            and set(self.params) == set(other.params)
            and all(np.array_equal(self.params[k], other.params[k]) for k in self.params)
            and (self.val_loss == other.val_loss or (math.isnan(self.val_loss) and math.isnan(other.val_loss)))
            and np.array_equal(self.standardizer_mean, other.standardizer_mean)
            and np.array_equal(self.standardizer_scale, other.standardizer_scale)
        )


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Write an ``.npz`` archive; see README for the layout."""
    hist = np.array([[r[c] for c in HISTORY_COLUMNS] for r in ckpt.history], dtype=np.float64).reshape(
        -1, len(HISTORY_COLUMNS)
    )
    arrays = {
        "format_version": np.array(ckpt.version),
        "config": np.array(flatconfig.dumps({**ckpt.config, "cell_type": CELL_TYPE})),
        "epoch": np.array(ckpt.epoch, dtype=np.int64),
        "history": hist,
        "history_columns": np.array(",".join(HISTORY_COLUMNS)),
        "epoch_seconds": np.asarray(ckpt.epoch_seconds, dtype=np.float64),
        "val_loss": np.array(ckpt.val_loss, dtype=np.float64),
        "dt": np.array(ckpt.dt, dtype=np.float64),
        "standardizer/mean": np.asarray(ckpt.standardizer_mean),
        "standardizer/scale": np.asarray(ckpt.standardizer_scale),
    }
    for k, v in ckpt.params.items():
        arrays[f"param/{k}"] = v
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> Checkpoint:
    with np.load(path, allow_pickle=False) as z:
        version = str(z["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ValidationError(f"unsupported checkpoint version {version!r}")
        cols = str(z["history_columns"]).split(",")
        history = [
            {c: (int(v) if c == "epoch" else float(v)) for c, v in zip(cols, row)} for row in z["history"]
        ]
        defaults = SmoothTrajectron().get_params()
        stored = flatconfig.loads(str(z["config"]))
        check_cell_type(stored.pop("cell_type", CELL_TYPE), path)
        cfg = {**defaults, **stored}
        for k in ("n_input", "clip_norm"):
            cfg.setdefault(k, None)
        return Checkpoint(
            params={k[len("param/"):]: z[k].copy() for k in z.files if k.startswith("param/")},
            config=cfg,
            epoch=int(z["epoch"]),
            history=history,
            epoch_seconds=[float(x) for x in z["epoch_seconds"]],
            val_loss=float(z["val_loss"]),
            dt=float(z["dt"]),
            standardizer_mean=z["standardizer/mean"].copy(),
            standardizer_scale=z["standardizer/scale"].copy(),
            version=version,
        )


# -- gradient verification ------------------------------------------------


def grad_check_coords(loss_fn, params, eps: float = 1e-5, n_coords=300, seed: int = 0):
    """Per-coordinate analytic and central-difference gradients.

    Returns ``(analytic, numeric)`` arrays over every coordinate of
    ``params`` when ``n_coords`` is None or covers them all, else over a
    seeded random subset.
    """
    params = list(params)
    for p in params:
        p.grad = None
    loss_fn().backward()
    analytic = [p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p) for p in params]
    sizes = [p.numel() for p in params]
    total = sum(sizes)
    coords = np.arange(total)
    if n_coords is not None and n_coords < total:
        coords = np.sort(np.random.default_rng(seed).choice(total, size=n_coords, replace=False))
    offsets = np.cumsum([0] + sizes)
    a_out, n_out = np.empty(len(coords)), np.empty(len(coords))
    with torch.no_grad():
        for k, c in enumerate(coords):
            i = int(np.searchsorted(offsets, c, side="right") - 1)
            flat = params[i].view(-1)
            j = int(c - offsets[i])
            orig = flat[j].item()
            flat[j] = orig + eps
            f_plus = float(loss_fn())
            flat[j] = orig - eps
            f_minus = float(loss_fn())
            flat[j] = orig
            n_out[k] = (f_plus - f_minus) / (2.0 * eps)
            a_out[k] = float(analytic[i].view(-1)[j])
    return a_out, n_out


def relative_errors(analytic, numeric) -> np.ndarray:
    """``|a - n| / max(|a|, |n|, 1e-8)`` elementwise."""
    a, n = np.asarray(analytic), np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)


def grad_check(loss_fn, params, eps: float = 1e-5, n_coords=300, seed: int = 0) -> float:
    """Max relative error between autograd and central finite differences.

    ``loss_fn()`` returns a scalar tensor built from ``params`` (a list of
    float64 tensors with ``requires_grad``). See :func:`grad_check_coords`
    for coordinate selection.
    """
    a, n = grad_check_coords(loss_fn, params, eps, n_coords, seed)
    return float(relative_errors(a, n).max()) if len(a) else 0.0


def model_loss_fn(est: SmoothTrajectron, samples, beta=None):
    """Closure over the full network objective on ``samples`` for :func:`grad_check`."""
    batch = TensorBatch.from_samples(samples)
    cfg = LossConfig(est.beta if beta is None else beta, est.kl_weight)
    return lambda: est.net_.loss(batch, cfg, est.smooth_term)[0].total


# -- evaluation ----------------------------------------------------------


class MetricsTable:
    """Rows of (model, beta, split, metric, horizon_s, value, seed) with unique keys."""

    def __init__(self, rows=None):
        self.rows = []
        self._keys = set()
        for r in rows or []:
            self.add(**r)

    def add(self, model, beta, split, metric, horizon_s, value, seed):
        key = (str(model), float(beta), str(split), str(metric), float(horizon_s), int(seed))
        if key in self._keys:
            raise ValidationError(f"duplicate metrics row {key}")
        self._keys.add(key)
        self.rows.append(dict(zip(RESULTS_HEADER, (key[0], key[1], key[2], key[3], key[4], float(value), key[5]))))

    def extend(self, other: "MetricsTable"):
        for r in other.rows:
            self.add(**r)
        return self

    def __len__(self):
        return len(self.rows)

    def __eq__(self, other):
        return isinstance(other, MetricsTable) and self.rows == other.rows

    def select(self, **kw) -> list:
        return [r for r in self.rows if all(r[k] == v for k, v in kw.items())]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RESULTS_HEADER)
            for r in self.rows:
                w.writerow([r["model"], repr(r["beta"]), r["split"], r["metric"], repr(r["horizon_s"]),
                            repr(r["value"]), r["seed"]])

    @classmethod
    def from_csv(cls, path) -> "MetricsTable":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != RESULTS_HEADER:
                raise ValidationError(f"{path}: results header must be {','.join(RESULTS_HEADER)}")
            rows = [dict(zip(RESULTS_HEADER, row)) for row in reader if row]
        return cls(rows)


def horizon_steps(horizons_s, dt: float) -> list:
    steps = []
    for h in horizons_s:
        n = h / dt
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ConfigurationError(f"horizons: {h}s is not a positive multiple of dt={dt}s", field="horizons")
        steps.append(int(round(n)))
    return steps


def evaluate(
    model,
    scenes,
    horizons_s=DEFAULT_HORIZONS_S,
    split="random",
    model_tag="st",
    seed=0,
    n_samples=None,
    units="meters",
) -> MetricsTable:
    """Per-class FDE/ADE (most likely), KDE-NLL (sampled) and gap AUC rows.

    ``model`` needs ``predict(X, n_samples=, seed=, units=, require_future=True)``.
    Model names in the table are ``"{model_tag}/{class}"``; AUC rows use the
    ego vehicle of each gap scene and are skipped when there are no gap
    scenes or only one label.
    """
    scenes = check_scene_set(scenes)
    dt = scenes[0].dt
    steps = horizon_steps(horizons_s, dt)
    n_samples = getattr(model, "n_samples", 200) if n_samples is None else n_samples
    preds = model.predict(scenes, n_samples=n_samples, seed=seed, units=units, require_future=True)
    if not preds:
        raise ValidationError("no eligible focal agents to evaluate")
    if max(steps) > preds[0].horizon:
        raise ConfigurationError(f"horizons: {max(horizons_s)}s exceeds the model horizon", field="horizons")
    st = model.standardizer_ if units == "standardized" else None
    gts = SmoothTrajectron.ground_truth(scenes, preds, st)
    beta = float(getattr(model, "beta", 0.0))
    table = MetricsTable()
    for cls in AgentClass:
        idx = [i for i, p in enumerate(preds) if p.agent_class == int(cls)]
        if not idx:
            continue
        name = f"{model_tag}/{cls.label}"
        for h, hs in zip(steps, horizons_s):
            table.add(name, beta, split, "fde", hs, np.mean([fde(preds[i].trajectory, gts[i], h) for i in idx]), seed)
            table.add(name, beta, split, "ade", hs, np.mean([ade(preds[i].trajectory, gts[i], h) for i in idx]), seed)
            if n_samples:
                table.add(name, beta, split, "kde_nll", hs,
                          np.mean([kde_nll(preds[i].samples, gts[i], h) for i in idx]), seed)

    by_id = {s.scene_id: s for s in scenes}
    ego = [p for p in preds if by_id[p.scene_id].gap_meta is not None and p.agent_id == EGO_AGENT_ID]
    if not ego or not n_samples:
        log.info("no gap scenes with ego predictions; AUC skipped")
        return table
    labels = np.array([by_id[p.scene_id].gap_meta.accepted for p in ego])
    if labels.all() or not labels.any():
        log.info("gap test set has a single label; AUC skipped")
        return table
    to_m = (lambda a: model.standardizer_.inverse_positions(a)) if units == "standardized" else (lambda a: a)
    ego_cls = AgentClass(ego[0].agent_class).label
    for h, hs in zip(steps, horizons_s):
        scores = [gap_acceptance_score(to_m(p.samples), by_id[p.scene_id], p.frame, h) for p in ego]
        table.add(f"{model_tag}/{ego_cls}", beta, split, "auc", hs, auc(scores, labels), seed)
    return table


def measure_attention_tv(model, scenes) -> float:
    """Mean per-agent temporal total variation of attention on ``scenes``."""
    return model.attention_tv(scenes)
