"""Training objective: negative ELBO plus a temporal total-variation penalty on attention."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .exceptions import ConfigurationError, ValidationError

TV_EPS = 1e-12


@dataclass
class LossConfig:
    beta: float = 0.0
    kl_weight: float = 1.0

    def __post_init__(self):
        if not self.beta >= 0:
            raise ConfigurationError("beta: must be >= 0", field="beta")
        if not self.kl_weight >= 0:
            raise ConfigurationError("kl_weight: must be >= 0", field="kl_weight")


@dataclass
class LossBreakdown:
    nll: torch.Tensor
    kl: torch.Tensor
    smooth: torch.Tensor
    l0: torch.Tensor
    total: torch.Tensor
    beta: float
    kl_weight: float = 1.0

    def as_floats(self) -> dict:
        return {
            "nll": float(self.nll.detach()),
            "kl": float(self.kl.detach()),
            "smooth": float(self.smooth.detach()),
            "l0": float(self.l0.detach()),
            "total": float(self.total.detach()),
            "beta": float(self.beta),
        }


def _as_alpha_tensor(traces) -> torch.Tensor:
    if isinstance(traces, torch.Tensor):
        alpha = traces
    elif isinstance(traces, np.ndarray):
        alpha = torch.as_tensor(traces, dtype=torch.float64)
    else:
        rows = []
        for i, tr in enumerate(traces):
            a = getattr(tr, "alpha", tr)
            if not isinstance(a, (np.ndarray, torch.Tensor)):
                widths = {len(step) for step in a}
                if len(widths) > 1:
                    raise ValidationError(f"trace {i}: number of attention keys changes across steps")
            rows.append(torch.as_tensor(np.asarray(a, dtype=np.float64) if not isinstance(a, torch.Tensor) else a))
        shapes = {tuple(r.shape) for r in rows}
        if len(shapes) > 1:
            raise ValidationError(f"traces have differing shapes {sorted(shapes)}")
        alpha = torch.stack(rows) if rows else torch.zeros(0, 1, 1, dtype=torch.float64)
    if alpha.dim() == 2:
        alpha = alpha.unsqueeze(0)
    if alpha.dim() != 3:
        raise ValidationError("attention traces must have shape (agents, steps, keys)")
    return alpha


def smooth_loss(traces, eps: float = TV_EPS) -> torch.Tensor:
    """Vectorial total variation of attention over time, summed over agents.

    ``traces`` is an (N, T+1, K) array/tensor or a sequence of per-agent
    traces. Each consecutive-step difference contributes
    ``sqrt(||alpha[t] - alpha[t-1]||^2 + eps)``. No normalisation by N or T.
    """
    alpha = _as_alpha_tensor(traces)
    diff = alpha[:, 1:] - alpha[:, :-1]
    return torch.sqrt((diff * diff).sum(-1) + eps).sum()


def attention_tv(alpha) -> np.ndarray:
    """Per-agent sum over steps of ``||alpha[t] - alpha[t-1]||_2`` (no smoothing epsilon)."""
    a = np.asarray(alpha, dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
    return np.linalg.norm(np.diff(a, axis=1), axis=-1).sum(axis=1)


def elbo_loss(log_prob, kl, kl_weight: float = 1.0):
    """Negative ELBO: ``-log_prob + kl_weight * kl``."""
    return -log_prob + kl_weight * kl


def total_loss(l0, smooth, config: LossConfig, nll=None, kl=None) -> LossBreakdown:
    """Combine the base loss with the weighted penalty.

    With ``beta == 0`` the penalty is not added at all, so the total is the
    very same tensor as ``l0``.
    """
    if not config.beta >= 0:
        raise ConfigurationError("beta: must be >= 0", field="beta")
    total = l0 if config.beta == 0 else l0 + config.beta * smooth
    zero = torch.zeros((), dtype=torch.float64)
    return LossBreakdown(
        nll=nll if nll is not None else torch.as_tensor(l0),
        kl=kl if kl is not None else zero,
        smooth=torch.as_tensor(smooth),
        l0=torch.as_tensor(l0),
        total=torch.as_tensor(total),
        beta=config.beta,
        kl_weight=config.kl_weight,
    )
