"""Contextual character-derived token embeddings.

Character ids are embedded, run through a bidirectional GRU over the whole
flattened character sequence of a URL, and each token is summarized by the
concatenated hidden states of its first and last character.

The GRU cell follows the convention where the update gate weights the
candidate state and (1 - z) weights the carried state:

    z = sigmoid(W_z [h, x] + b_z)
    r = sigmoid(W_r [h, x] + b_r)
    c = tanh(W_h [r * h, x] + b_h)
    h' = (1 - z) * h + z * c

The two directional streams are combined elementwise with learned vectors
w, v and bias b shared across positions.
"""

from __future__ import annotations

import math

import torch
from torch import nn


def _uniform_init(tensor: torch.Tensor, fan_in: int, gen: torch.Generator | None):
    bound = 1.0 / math.sqrt(fan_in)
    with torch.no_grad():
        tensor.uniform_(-bound, bound, generator=gen)


class GruCell(nn.Module):
    """Single-direction gated recurrent cell over [h_prev, x] concatenations."""

    def __init__(self, input_dim: int, hidden_dim: int,
                 generator: torch.Generator | None = None):
        super().__init__()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        fan_in = hidden_dim + input_dim
        self.w_z = nn.Parameter(torch.empty(hidden_dim, fan_in))
        self.w_r = nn.Parameter(torch.empty(hidden_dim, fan_in))
        self.w_h = nn.Parameter(torch.empty(hidden_dim, fan_in))
        self.b_z = nn.Parameter(torch.zeros(hidden_dim))
        self.b_r = nn.Parameter(torch.zeros(hidden_dim))
        self.b_h = nn.Parameter(torch.zeros(hidden_dim))
        for w in (self.w_z, self.w_r, self.w_h):
            _uniform_init(w, fan_in, generator)

    def forward(self, h_prev: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
        if h_prev.shape[-1] != self.hidden_dim or x.shape[-1] != self.input_dim:
            raise ValueError(
                f"shape mismatch: h {tuple(h_prev.shape)}, x {tuple(x.shape)}"
            )
        hx = torch.cat([h_prev, x], dim=-1)
        z = torch.sigmoid(nn.functional.linear(hx, self.w_z, self.b_z))
        r = torch.sigmoid(nn.functional.linear(hx, self.w_r, self.b_r))
        rhx = torch.cat([r * h_prev, x], dim=-1)
        c = torch.tanh(nn.functional.linear(rhx, self.w_h, self.b_h))
        return (1.0 - z) * h_prev + z * c


class BiGru(nn.Module):
    """Forward and backward GRU passes combined per position."""

    def __init__(self, input_dim: int, hidden_dim: int,
                 generator: torch.Generator | None = None):
        super().__init__()
        self.hidden_dim = hidden_dim
        self.fwd = GruCell(input_dim, hidden_dim, generator)
        self.bwd = GruCell(input_dim, hidden_dim, generator)
        self.comb_w = nn.Parameter(torch.full((hidden_dim,), 0.5))
        self.comb_v = nn.Parameter(torch.full((hidden_dim,), 0.5))
        self.comb_b = nn.Parameter(torch.zeros(hidden_dim))

    def forward(self, x: torch.Tensor,
                lengths: torch.Tensor | None = None) -> torch.Tensor:
        """x: (batch, steps, input_dim) -> combined hidden (batch, steps, hidden).

        Positions at or beyond a sequence's length never update either
        directional state, so per-position outputs inside the valid region
        are identical to running that sequence alone.
        """
        squeeze = x.dim() == 2
        if squeeze:
            x = x.unsqueeze(0)
        batch, steps, _ = x.shape
        if steps < 1:
            raise ValueError("sequence must have at least one step")
        if lengths is None:
            lengths = torch.full((batch,), steps, dtype=torch.long, device=x.device)

        h = x.new_zeros(batch, self.hidden_dim)
        fwd_states = []
        for t in range(steps):
            valid = (lengths > t).to(x.dtype).unsqueeze(-1)
            h = valid * self.fwd(h, x[:, t]) + (1.0 - valid) * h
            fwd_states.append(h)
        h = x.new_zeros(batch, self.hidden_dim)
        bwd_states = [None] * steps
        for t in range(steps - 1, -1, -1):
            valid = (lengths > t).to(x.dtype).unsqueeze(-1)
            h = valid * self.bwd(h, x[:, t]) + (1.0 - valid) * h
            bwd_states[t] = h
        fwd_seq = torch.stack(fwd_states, dim=1)
        bwd_seq = torch.stack(bwd_states, dim=1)
        out = self.comb_w * fwd_seq + self.comb_v * bwd_seq + self.comb_b
        return out.squeeze(0) if squeeze else out


def token_char_embedding(hidden: torch.Tensor,
                         boundaries: list[tuple[int, int]]) -> torch.Tensor:
    """Concatenate first- and last-character hidden states per token.

    hidden: (steps, hidden_dim); boundaries: (first, last) flat indices per
    token.  Returns (num_tokens, 2 * hidden_dim).
    """
    firsts = torch.tensor([b[0] for b in boundaries], device=hidden.device)
    lasts = torch.tensor([b[1] for b in boundaries], device=hidden.device)
    return torch.cat([hidden[firsts], hidden[lasts]], dim=-1)


class CharChannel(nn.Module):
    """Character embedding lookup, BiGRU, and token boundary readout."""

    def __init__(self, char_vocab_size: int, char_dim: int, hidden_dim: int,
                 generator: torch.Generator | None = None):
        super().__init__()
        self.embedding = nn.Embedding(char_vocab_size, char_dim)
        _uniform_init(self.embedding.weight, char_dim, generator)
        self.bigru = BiGru(char_dim, hidden_dim, generator)
        self.output_dim = 2 * hidden_dim

    def forward(self, char_ids: torch.Tensor, char_lengths: torch.Tensor,
                first_idx: torch.Tensor, last_idx: torch.Tensor,
                token_mask: torch.Tensor) -> torch.Tensor:
        """char_ids: (batch, max_chars); first/last_idx, token_mask: (batch, width).

        Returns (batch, width, 2 * hidden_dim); rows of padding tokens are
        exactly zero.
        """
        hidden = self.bigru(self.embedding(char_ids), char_lengths)
        dh = hidden.shape[-1]
        gather_first = first_idx.unsqueeze(-1).expand(-1, -1, dh)
        gather_last = last_idx.unsqueeze(-1).expand(-1, -1, dh)
        out = torch.cat(
            [hidden.gather(1, gather_first), hidden.gather(1, gather_last)], dim=-1
        )
        return out * token_mask.to(out.dtype).unsqueeze(-1)
