"""Node encoder: history, class-keyed edges, per-step additive attention, influence.

All recurrent parts use :class:`GRUCell` (a gated recurrent cell with
tanh candidate activation) and emit every per-step state so each history
step can act as an attention query.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .exceptions import NumericError
from .features import EDGE_DIM, STATE_DIM, aggregate_edges  # noqa: F401  (re-exported)
from .scenes.types import NUM_CLASSES, AgentClass

CELL_TYPE = "gru"


def init_uniform_(param: torch.Tensor, fan_in: int, generator: torch.Generator) -> torch.Tensor:
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    with torch.no_grad():
        param.uniform_(-bound, bound, generator=generator)
    return param


class GRUCell(nn.Module):
    def __init__(self, input_dim: int, hidden_dim: int):
        super().__init__()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.weight_ih = nn.Parameter(torch.empty(3 * hidden_dim, input_dim, dtype=torch.float64))
        self.weight_hh = nn.Parameter(torch.empty(3 * hidden_dim, hidden_dim, dtype=torch.float64))
        self.bias = nn.Parameter(torch.empty(3 * hidden_dim, dtype=torch.float64))

    def reset_parameters(self, generator):
        init_uniform_(self.weight_ih, self.input_dim, generator)
        init_uniform_(self.weight_hh, self.hidden_dim, generator)
        init_uniform_(self.bias, self.input_dim, generator)

    def forward(self, x, h):
        gx = x @ self.weight_ih.T + self.bias
        gh = h @ self.weight_hh.T
        H = self.hidden_dim
        r = torch.sigmoid(gx[..., :H] + gh[..., :H])
        z = torch.sigmoid(gx[..., H : 2 * H] + gh[..., H : 2 * H])
        n = torch.tanh(gx[..., 2 * H :] + r * gh[..., 2 * H :])
        return (1.0 - z) * n + z * h

    def run(self, seq, h0=None):
        """Unroll over ``seq`` of shape (B, L, input_dim); returns (B, L, hidden_dim)."""
        h = seq.new_zeros(seq.shape[0], self.hidden_dim) if h0 is None else h0
        # input projections for all steps at once; only the hidden path is sequential
        gx_all = seq @ self.weight_ih.T + self.bias
        H = self.hidden_dim
        out = []
        for k in range(seq.shape[1]):
            gx = gx_all[:, k]
            gh = h @ self.weight_hh.T
            r = torch.sigmoid(gx[:, :H] + gh[:, :H])
            z = torch.sigmoid(gx[:, H : 2 * H] + gh[:, H : 2 * H])
            n = torch.tanh(gx[:, 2 * H :] + r * gh[:, 2 * H :])
            h = (1.0 - z) * n + z * h
            out.append(h)
        return torch.stack(out, dim=1)


class AdditiveAttention(nn.Module):
    """score_k = v . tanh(W_q q + W_k m_k); alpha = softmax over k."""

    def __init__(self, query_dim: int, key_dim: int, attention_dim: int):
        super().__init__()
        self.query_dim, self.key_dim = query_dim, key_dim
        self.W_q = nn.Parameter(torch.empty(attention_dim, query_dim, dtype=torch.float64))
        self.W_k = nn.Parameter(torch.empty(attention_dim, key_dim, dtype=torch.float64))
        self.v = nn.Parameter(torch.empty(attention_dim, dtype=torch.float64))

    def reset_parameters(self, generator):
        init_uniform_(self.W_q, self.query_dim, generator)
        init_uniform_(self.W_k, self.key_dim, generator)
        init_uniform_(self.v, self.v.shape[0], generator)

    def scores(self, query, keys):
        return torch.tanh((query @ self.W_q.T).unsqueeze(-2) + keys @ self.W_k.T) @ self.v

    def forward(self, query, keys):
        """``query`` (..., Dq), ``keys`` (..., K, Dk) -> alpha (..., K), context (..., Dk)."""
        alpha = torch.softmax(self.scores(query, keys), dim=-1)
        context = (alpha.unsqueeze(-1) * keys).sum(dim=-2)
        return alpha, context


@dataclass
class EncoderConfig:
    T: int = 9
    hidden_dim: int = 32
    edge_hidden_dim: int = 16
    attention_dim: int = 16
    state_dim: int = STATE_DIM
    num_edge_classes: int = NUM_CLASSES
    cell_type: str = CELL_TYPE

    def __post_init__(self):
        for name in ("T", "hidden_dim", "edge_hidden_dim", "attention_dim", "state_dim", "num_edge_classes"):
            if getattr(self, name) < 1:
                raise ValueError(f"EncoderConfig.{name} must be >= 1")


def edge_param_name(a, b) -> str:
    return f"{AgentClass(a).label}_{AgentClass(b).label}"


@dataclass
class AttentionTrace:
    """Attention weights ``alpha[step, key]`` over the history window."""

    alpha: np.ndarray
    present: np.ndarray


class NodeEncoder(nn.Module):
    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        E = config.edge_hidden_dim
        self.history = GRUCell(config.state_dim, config.hidden_dim)
        self.edges = nn.ModuleDict(
            {edge_param_name(a, b): GRUCell(EDGE_DIM, E) for a in AgentClass for b in AgentClass}
        )
        self.attention = AdditiveAttention(config.hidden_dim, E, config.attention_dim)
        self.influence = GRUCell(E, E)

    @property
    def output_dim(self) -> int:
        return self.config.hidden_dim + self.config.edge_hidden_dim

    def reset_parameters(self, generator):
        self.history.reset_parameters(generator)
        for name in sorted(self.edges):
            self.edges[name].reset_parameters(generator)
        self.attention.reset_parameters(generator)
        self.influence.reset_parameters(generator)

    def encode_history(self, window):
        """(B, L, state_dim) -> per-step hidden states (B, L, hidden_dim)."""
        if not torch.isfinite(window).all():
            raise NumericError("non-finite value in history window")
        return self.history.run(window)

    def encode_edge(self, agg, key):
        """(B, L, 4) aggregated neighbor states for edge key ``(a, b)`` -> (B, L, E)."""
        if not torch.isfinite(agg).all():
            raise NumericError("non-finite value in aggregated edge features")
        return self.edges[edge_param_name(*key)].run(agg)

    def attend(self, query, keys):
        return self.attention(query, keys)

    def edge_influence(self, contexts):
        """Recurrent pass over per-step contexts (B, L, E); final state (B, E)."""
        return self.influence.run(contexts)[:, -1]

    def forward(self, hist, agg, focal_class):
        """Encode a batch.

        ``hist`` (B, L, state_dim), ``agg`` (B, K, L, 4) keyed by neighbor
        class, ``focal_class`` (B,) long. Returns ``e_x`` (B, hidden+E) and
        attention weights (B, L, K).
        """
        B, K, L, _ = agg.shape
        h = self.encode_history(hist)
        E = self.config.edge_hidden_dim
        m = hist.new_zeros(B, K, L, E)
        for a in AgentClass:
            idx = torch.nonzero(focal_class == int(a), as_tuple=True)[0]
            if idx.numel() == 0:
                continue
            for b in AgentClass:
                m[idx, int(b)] = self.encode_edge(agg[idx, int(b)], (a, b))
        keys = m.permute(0, 2, 1, 3)  # (B, L, K, E)
        alpha, context = self.attend(h, keys)
        influence = self.edge_influence(context)
        e_x = torch.cat([h[:, -1], influence], dim=-1)
        return e_x, alpha
