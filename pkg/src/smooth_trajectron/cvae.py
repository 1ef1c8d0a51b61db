"""Discrete-latent CVAE head: prior/posterior over modes, velocity decoder, integration."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from torch import nn

from .encoder import GRUCell, init_uniform_

LOG_2PI = math.log(2.0 * math.pi)
MIN_STD = 1e-6
MAX_LOG_STD = math.log(1e3)
PROB_FLOOR = 1e-12


class OutputMode(str, enum.Enum):
    MOST_LIKELY = "most_likely"
    SAMPLED = "sampled"


@dataclass
class GaussianSteps:
    """Bivariate Gaussians over steps via lower Cholesky factors.

    ``mean`` (..., H, 2); ``log_diag`` (..., H, 2) holds log L11, log L22;
    ``offdiag`` (..., H) holds L21. Works for torch tensors and numpy arrays.
    """

    mean: object
    log_diag: object
    offdiag: object

    def chol(self):
        xp = torch if isinstance(self.mean, torch.Tensor) else np
        d = xp.exp(self.log_diag)
        zero = xp.zeros_like(self.offdiag)
        row0 = xp.stack([d[..., 0], zero], -1)
        row1 = xp.stack([self.offdiag, d[..., 1]], -1)
        return xp.stack([row0, row1], -2)

    def cov(self):
        L = self.chol()
        return L @ L.swapaxes(-1, -2)

    def log_det(self):
        return 2.0 * self.log_diag.sum(-1)

    @classmethod
    def from_cov(cls, mean, cov):
        """Analytic 2x2 Cholesky of ``cov`` (..., 2, 2)."""
        xp = torch if isinstance(cov, torch.Tensor) else np
        l11 = xp.sqrt(cov[..., 0, 0])
        l21 = cov[..., 1, 0] / l11
        l22 = xp.sqrt(cov[..., 1, 1] - l21 * l21)
        return cls(mean, xp.stack([xp.log(l11), xp.log(l22)], -1), l21)

    def numpy(self) -> "GaussianSteps":
        conv = lambda a: a.detach().cpu().numpy() if isinstance(a, torch.Tensor) else np.asarray(a)
        return GaussianSteps(conv(self.mean), conv(self.log_diag), conv(self.offdiag))

    def __getitem__(self, idx) -> "GaussianSteps":
        return GaussianSteps(self.mean[idx], self.log_diag[idx], self.offdiag[idx])


@dataclass
class PredictionOutput:
    """Prediction for one focal agent at one frame (units set by the producer)."""

    scene_id: int
    agent_id: int
    frame: int
    agent_class: int
    position_dists: GaussianSteps
    z_dist: np.ndarray
    mode: OutputMode = OutputMode.MOST_LIKELY
    samples: Optional[np.ndarray] = None

    @property
    def trajectory(self) -> np.ndarray:
        return self.position_dists.mean

    @property
    def horizon(self) -> int:
        return self.trajectory.shape[0]


def integrate(velocity: GaussianSteps, x_t, dt: float) -> GaussianSteps:
    """Euler-integrate velocity Gaussians into position Gaussians.

    Means accumulate ``dt * v``; covariances accumulate ``dt**2 * Sigma_v``
    assuming independent steps.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    vm = torch.as_tensor(velocity.mean, dtype=torch.float64)
    vel = GaussianSteps(vm, torch.as_tensor(velocity.log_diag, dtype=torch.float64),
                        torch.as_tensor(velocity.offdiag, dtype=torch.float64))
    x0 = torch.as_tensor(x_t, dtype=torch.float64)
    mean = x0.unsqueeze(-2) + dt * torch.cumsum(vm, dim=-2)
    cov = (dt * dt) * torch.cumsum(vel.cov(), dim=-3)
    return GaussianSteps.from_cov(mean, cov)


def log_prob(dists: GaussianSteps, gt) -> torch.Tensor:
    """Exact bivariate Gaussian log-density of ``gt`` (..., H, 2), summed over steps."""
    mean = torch.as_tensor(dists.mean, dtype=torch.float64)
    log_diag = torch.as_tensor(dists.log_diag, dtype=torch.float64)
    off = torch.as_tensor(dists.offdiag, dtype=torch.float64)
    gt = torch.as_tensor(gt, dtype=torch.float64)
    if gt.shape[-2] != mean.shape[-2]:
        raise ValueError("prediction and ground truth lengths differ")
    diff = gt - mean
    d = torch.exp(log_diag)
    u1 = diff[..., 0] / d[..., 0]
    u2 = (diff[..., 1] - off * u1) / d[..., 1]
    per_step = -LOG_2PI - log_diag.sum(-1) - 0.5 * (u1 * u1 + u2 * u2)
    return per_step.sum(-1)


def kl_categorical(q, p) -> torch.Tensor:
    """KL(q || p) in nats along the last axis; ``p`` is floored at 1e-12."""
    q = torch.as_tensor(q, dtype=torch.float64)
    p = torch.as_tensor(p, dtype=torch.float64).clamp_min(PROB_FLOOR)
    return (torch.special.xlogy(q, q) - q * torch.log(p)).sum(-1)


class Linear(nn.Module):
    def __init__(self, in_dim: int, out_dim: int):
        super().__init__()
        self.in_dim = in_dim
        self.weight = nn.Parameter(torch.empty(out_dim, in_dim, dtype=torch.float64))
        self.bias = nn.Parameter(torch.empty(out_dim, dtype=torch.float64))

    def reset_parameters(self, generator):
        init_uniform_(self.weight, self.in_dim, generator)
        init_uniform_(self.bias, self.in_dim, generator)

    def forward(self, x):
        return x @ self.weight.T + self.bias


class CategoricalHead(nn.Module):
    """One-hidden-layer map to ``n_modes`` softmax probabilities."""

    def __init__(self, in_dim: int, hidden_dim: int, n_modes: int):
        super().__init__()
        self.hidden = Linear(in_dim, hidden_dim)
        self.out = Linear(hidden_dim, n_modes)

    def reset_parameters(self, generator):
        self.hidden.reset_parameters(generator)
        self.out.reset_parameters(generator)

    def logits(self, x):
        return self.out(torch.tanh(self.hidden(x)))

    def forward(self, x):
        return torch.softmax(self.logits(x), dim=-1)


class FutureEncoder(nn.Module):
    def __init__(self, future_dim: int):
        super().__init__()
        self.cell = GRUCell(4, future_dim)

    def reset_parameters(self, generator):
        self.cell.reset_parameters(generator)

    def forward(self, future):
        """(B, H, 4) ground-truth future -> e_y (B, future_dim)."""
        return self.cell.run(future)[:, -1]


class VelocityDecoder(nn.Module):
    """Autoregressive GRU emitting per-step velocity Gaussians.

    Conditioned on ``(e_x, one-hot z)``; the step input is the previous mean
    velocity, and each mean is that input plus a learned increment. The
    ``in_scale`` and ``out_scale`` buffers (per coordinate) keep the network
    working at unit scale: inputs are divided by ``in_scale`` and increments
    and standard deviations are multiplied by ``out_scale``.
    """

    def __init__(self, context_dim: int, n_modes: int, hidden_dim: int):
        super().__init__()
        cond = context_dim + n_modes
        self.init = Linear(cond, hidden_dim)
        self.cell = GRUCell(2 + cond, hidden_dim)
        self.head = Linear(hidden_dim, 5)
        self.register_buffer("in_scale", torch.ones(2, dtype=torch.float64))
        self.register_buffer("out_scale", torch.ones(2, dtype=torch.float64))

    def reset_parameters(self, generator):
        self.init.reset_parameters(generator)
        self.cell.reset_parameters(generator)
        self.head.reset_parameters(generator)

    def forward(self, e_x, z_onehot, v0, horizon: int) -> GaussianSteps:
        cond = torch.cat([e_x, z_onehot], dim=-1)
        h = torch.tanh(self.init(cond))
        v = v0
        log_out = torch.log(self.out_scale)
        means, log_diags, offs = [], [], []
        for _ in range(horizon):
            h = self.cell(torch.cat([v / self.in_scale, cond], dim=-1), h)
            out = self.head(h)
            v = v + out[..., :2] * self.out_scale
            means.append(v)
            log_diags.append((out[..., 2:4] + log_out).clamp(math.log(MIN_STD), MAX_LOG_STD))
            offs.append(out[..., 4] * self.out_scale[1])
        return GaussianSteps(torch.stack(means, -2), torch.stack(log_diags, -2), torch.stack(offs, -1))


@dataclass
class LatentConfig:
    n_modes: int = 5
    future_dim: int = 16
    latent_hidden_dim: int = 32
    decoder_dim: int = 32

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")


def most_likely_mode(prior_probs) -> np.ndarray:
    """Argmax over modes; ties resolve to the lowest index."""
    return np.argmax(np.asarray(prior_probs), axis=-1)


def predict_most_likely(prior_probs, velocity: GaussianSteps, x_t, dt: float):
    """Position Gaussians of the argmax-prior mode.

    ``velocity`` fields are shaped (Z, H, ...) for one agent. Returns
    ``(z_star, position GaussianSteps)``; the point trajectory is its mean.
    """
    z = int(most_likely_mode(prior_probs))
    pos = integrate(velocity[z], x_t, dt)
    return z, pos.numpy()


def sample_trajectories(prior_probs, velocity: GaussianSteps, x_t, dt: float, n: int, seed) -> np.ndarray:
    """Draw ``n`` position trajectories (n, H, 2): z ~ prior, then each velocity step.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    vel = velocity.numpy()
    p = np.asarray(prior_probs, dtype=np.float64)
    z = rng.choice(len(p), size=n, p=p / p.sum())
    L = vel.chol()[z]  # (n, H, 2, 2)
    eps = rng.standard_normal((n, vel.mean.shape[-2], 2))
    v = vel.mean[z] + (L @ eps[..., None])[..., 0]
    return np.asarray(x_t, dtype=np.float64) + dt * np.cumsum(v, axis=1)
