"""Trajectory forecasting with temporally smooth attention over neighbor classes."""

from .estimator import SmoothTrajectron
from .exceptions import ConfigurationError, NumericError, ParseError, SmoothTrajectronError, ValidationError
from .losses import LossBreakdown, LossConfig, attention_tv, smooth_loss, total_loss
from .metrics import ade, auc, fde, gap_acceptance_score, kde_nll
from .training import Checkpoint, MetricsTable, evaluate, grad_check, load_checkpoint, measure_attention_tv, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "Checkpoint",
    "ConfigurationError",
    "LossBreakdown",
    "LossConfig",
    "MetricsTable",
    "NumericError",
    "ParseError",
    "SmoothTrajectron",
    "SmoothTrajectronError",
    "ValidationError",
    "ade",
    "attention_tv",
    "auc",
    "evaluate",
    "fde",
    "gap_acceptance_score",
    "grad_check",
    "kde_nll",
    "load_checkpoint",
    "measure_attention_tv",
    "save_checkpoint",
    "smooth_loss",
    "total_loss",
    "train",
]
