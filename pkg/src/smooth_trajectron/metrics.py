"""Displacement errors, KDE negative log-likelihood, ROC-AUC, gap-acceptance score."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp
from scipy.stats import rankdata

from .exceptions import ValidationError
from .scenes.generate import LANE_BOUNDARY

KDE_BANDWIDTH_FLOOR = 1e-3
LOG_2PI = math.log(2.0 * math.pi)


def _check_horizon(pred, gt, h):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if h < 1 or h > len(pred) or h > len(gt):
        raise ValidationError(f"horizon {h} outside [1, {min(len(pred), len(gt))}]")
    return pred, gt


def fde(pred, gt, h: int) -> float:
    """Euclidean distance between the step-``h`` positions (1-based)."""
    pred, gt = _check_horizon(pred, gt, h)
    d = pred[h - 1] - gt[h - 1]
    return float(np.hypot(d[0], d[1]))


def ade(pred, gt, h: int) -> float:
    """Mean Euclidean distance over steps 1..h."""
    pred, gt = _check_horizon(pred, gt, h)
    d = pred[:h] - gt[:h]
    return float(np.hypot(d[:, 0], d[:, 1]).mean())


def scott_bandwidth(points) -> np.ndarray:
    """Per-coordinate Scott bandwidth ``n**(-1/6) * std`` for 2-D points, floored."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    std = points.std(axis=0, ddof=1) if n > 1 else np.zeros(points.shape[1])
    return np.maximum(n ** (-1.0 / 6.0) * std, KDE_BANDWIDTH_FLOOR)


def kde_log_density(points, query, bandwidth=None) -> float:
    """Log-density at ``query`` of an equal-weight Gaussian KDE on ``points`` (n, 2).

    ``bandwidth`` None uses :func:`scott_bandwidth`; a scalar gives a fixed
    isotropic kernel width.
    """
    points = np.asarray(points, dtype=np.float64)
    if len(points) == 0:
        raise ValidationError("KDE needs at least one sample")
    bw = scott_bandwidth(points) if bandwidth is None else np.full(2, float(bandwidth))
    u = (np.asarray(query, dtype=np.float64) - points) / bw
    return float(logsumexp(-0.5 * (u * u).sum(-1)) - math.log(len(points)) - LOG_2PI - np.log(bw).sum())


def kde_nll(samples, gt, h: int, bandwidth=None) -> float:
    """Mean over steps 1..h of the KDE negative log-likelihood of ``gt``.

    ``samples`` has shape (n, steps, 2). Steps are fitted independently.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 3 or samples.shape[0] == 0:
        raise ValidationError("samples must have shape (n >= 1, steps, 2)")
    gt = np.asarray(gt, dtype=np.float64)
    if h < 1 or h > samples.shape[1] or h > len(gt):
        raise ValidationError(f"horizon {h} outside the sample/ground-truth length")
    return float(-np.mean([kde_log_density(samples[:, s], gt[s], bandwidth) for s in range(h)]))


def _check_labels(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValidationError("scores and labels must be 1-D of equal length")
    if labels.all() or not labels.any():
        raise ValidationError("AUC needs at least one positive and one negative label")
    return scores, labels


def auc(scores, labels) -> float:
    """ROC-AUC via the rank statistic; ties count one half."""
    scores, labels = _check_labels(scores, labels)
    ranks = rankdata(scores)
    n_pos = labels.sum()
    n_neg = len(labels) - n_pos
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_curve(scores, labels):
    """False/true positive rates at every distinct score threshold, from (0, 0) to (1, 1)."""
    scores, labels = _check_labels(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    last_of_run = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tps = np.cumsum(y)[last_of_run]
    fps = np.cumsum(~y)[last_of_run]
    return np.r_[0.0, fps / fps[-1]], np.r_[0.0, tps / tps[-1]]


def auc_trapezoid(scores, labels) -> float:
    fpr, tpr = roc_curve(scores, labels)
    return float(np.trapezoid(tpr, fpr))


def gap_acceptance_score(samples, scene, start_frame: int, horizon=None, boundary: float = LANE_BOUNDARY) -> float:
    """Fraction of sampled ego trajectories crossing into the target lane in time.

    ``samples`` (n, steps, 2) in meters start one frame after ``start_frame``.
    A sample counts when its lateral coordinate exceeds ``boundary`` at a
    frame no later than ``decision_frame + horizon`` (``horizon`` in steps,
    default: all sample steps).
    """
    if scene.gap_meta is None:
        raise ValidationError(f"scene {scene.scene_id} has no gap metadata")
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 3 or samples.shape[0] == 0:
        raise ValidationError("samples must have shape (n >= 1, steps, 2)")
    step = scene.frame_step
    horizon = samples.shape[1] if horizon is None else int(horizon)
    frames = start_frame + step * np.arange(1, samples.shape[1] + 1)
    in_time = frames <= scene.gap_meta.decision_frame + horizon * step
    crossed = (samples[:, in_time, 1] > boundary).any(axis=1)
    return float(crossed.mean())
