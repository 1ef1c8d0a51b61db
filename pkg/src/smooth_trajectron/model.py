"""The full network: node encoder + discrete-latent CVAE head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .cvae import (
    CategoricalHead,
    FutureEncoder,
    GaussianSteps,
    LatentConfig,
    VelocityDecoder,
    integrate,
    kl_categorical,
    log_prob,
)
from .encoder import EncoderConfig, NodeEncoder
from .exceptions import NumericError
from .features import SampleBatch
from .losses import LossConfig, elbo_loss, smooth_loss, total_loss


@dataclass
class TensorBatch:
    hist: torch.Tensor
    agg: torch.Tensor
    focal_class: torch.Tensor
    velocity: torch.Tensor  # (B, 2) focal velocity at t
    future: torch.Tensor  # (B, H, 4)

    @classmethod
    def from_samples(cls, s: SampleBatch) -> "TensorBatch":
        f64 = lambda a: torch.as_tensor(np.ascontiguousarray(a), dtype=torch.float64)
        return cls(f64(s.hist), f64(s.agg), torch.as_tensor(s.focal_class, dtype=torch.long),
                   f64(s.x_t[:, 2:4]), f64(s.future))

    def __len__(self):
        return self.hist.shape[0]


class SmoothTrajectronNet(nn.Module):
    def __init__(self, enc: EncoderConfig, lat: LatentConfig, horizon: int, dt: float):
        super().__init__()
        self.enc_config, self.lat_config = enc, lat
        self.horizon, self.dt = int(horizon), float(dt)
        dx = enc.hidden_dim + enc.edge_hidden_dim
        self.encoder = NodeEncoder(enc)
        self.future_encoder = FutureEncoder(lat.future_dim)
        self.prior = CategoricalHead(dx, lat.latent_hidden_dim, lat.n_modes)
        self.posterior = CategoricalHead(dx + lat.future_dim, lat.latent_hidden_dim, lat.n_modes)
        self.decoder = VelocityDecoder(dx, lat.n_modes, lat.decoder_dim)
        # per-channel divisors for kinematic inputs; see fit_scales
        self.register_buffer("hist_scale", torch.ones(4, dtype=torch.float64))
        self.register_buffer("agg_scale", torch.ones(4, dtype=torch.float64))
        self.register_buffer("future_scale", torch.ones(4, dtype=torch.float64))

    @torch.no_grad()
    def fit_scales(self, batch: "TensorBatch", floor: float = 1e-3):
        """Set input and increment scales from training data (std per channel, floored)."""
        present = batch.hist[..., -1] > 0
        std = lambda a: a.std(dim=0, unbiased=False).clamp_min(floor) if len(a) else torch.ones(a.shape[-1], dtype=torch.float64)
        self.hist_scale.copy_(std(batch.hist[..., :4][present]))
        agg = batch.agg.reshape(-1, batch.agg.shape[-1])
        self.agg_scale.copy_(std(agg[agg.abs().sum(-1) > 0]))
        self.future_scale.copy_(std(batch.future.reshape(-1, 4)))
        vel = torch.cat([batch.velocity[:, None], batch.future[..., 2:4]], dim=1)
        self.decoder.in_scale.copy_(self.hist_scale[2:4])
        self.decoder.out_scale.copy_(std(torch.diff(vel, dim=1).reshape(-1, 2)))
        return self

    def _encode(self, batch: "TensorBatch"):
        hist = torch.cat([batch.hist[..., :4] / self.hist_scale, batch.hist[..., 4:]], dim=-1)
        return self.encoder(hist, batch.agg / self.agg_scale, batch.focal_class)

    @property
    def n_modes(self) -> int:
        return self.lat_config.n_modes

    def reset_parameters(self, seed: int):
        g = torch.Generator().manual_seed(int(seed))
        for part in (self.encoder, self.future_encoder, self.prior, self.posterior, self.decoder):
            part.reset_parameters(g)
        return self

    def n_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def decode_all_modes(self, e_x, velocity, horizon=None) -> GaussianSteps:
        """Velocity Gaussians for every mode: fields shaped (B, Z, H, ...)."""
        H = self.horizon if horizon is None else horizon
        B, Z = e_x.shape[0], self.n_modes
        ex = e_x.unsqueeze(1).expand(B, Z, -1).reshape(B * Z, -1)
        z = torch.eye(Z, dtype=e_x.dtype).unsqueeze(0).expand(B, Z, Z).reshape(B * Z, Z)
        v0 = velocity.unsqueeze(1).expand(B, Z, 2).reshape(B * Z, 2)
        out = self.decoder(ex, z, v0, H)
        return GaussianSteps(out.mean.reshape(B, Z, H, 2), out.log_diag.reshape(B, Z, H, 2),
                             out.offdiag.reshape(B, Z, H))

    def loss(self, batch: TensorBatch, config: LossConfig, smooth_term: bool = True):
        """Batch loss with exact expectation over the discrete latent under q.

        ``nll`` and ``kl`` are batch means; the attention penalty is summed
        over the batch's agents. ``smooth_term=False`` removes the penalty
        from the graph entirely.
        Returns ``(LossBreakdown, alpha)``.
        """
        e_x, alpha = self._encode(batch)
        e_y = self.future_encoder(batch.future / self.future_scale)
        p = self.prior(e_x)
        q = self.posterior(torch.cat([e_x, e_y], dim=-1))
        vel = self.decode_all_modes(e_x, batch.velocity, batch.future.shape[1])
        pos = integrate(vel, torch.zeros(2, dtype=torch.float64), self.dt)
        lp = log_prob(pos, batch.future[:, None, :, :2])  # (B, Z)
        nll = -(q * lp).sum(-1).mean()
        kl = kl_categorical(q, p).mean()
        l0 = elbo_loss(-nll, kl, config.kl_weight)
        if not smooth_term:
            smooth = torch.zeros((), dtype=torch.float64)
            config = LossConfig(0.0, config.kl_weight)
        elif config.beta != 0:
            smooth = smooth_loss(alpha)
        else:
            smooth = smooth_loss(alpha.detach())  # logged only
        out = total_loss(l0, smooth, config, nll=nll, kl=kl)
        if not torch.isfinite(out.total):
            bad = [k for k, v in out.as_floats().items() if not np.isfinite(v)]
            raise NumericError(f"non-finite loss terms: {', '.join(bad)}")
        return out, alpha

    @torch.no_grad()
    def infer(self, batch: TensorBatch, horizon=None):
        """Prior probabilities (B, Z), per-mode velocity Gaussians, attention (B, L, K)."""
        e_x, alpha = self._encode(batch)
        return self.prior(e_x), self.decode_all_modes(e_x, batch.velocity, horizon), alpha
