"""Post-norm transformer layers and the dual-stream encoder stack.

Each encoder depth runs one self-attention transformer layer over the word
stream, then lets the word and character streams interact. The pair of
per-stream outputs at every depth is kept, because later stages consume the
whole ladder of intermediate representations rather than only the final one.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from .interaction import HeteroInteraction
from .nn_init import init_linear


class TransformerLayer(nn.Module):
    """One encoder block: self-attention then feed-forward, post-norm style.

    Residual sums are normalized after the sublayer, and padding positions are
    excluded from attention with an additive mask of minus infinity, so their
    softmax weight is exactly zero.
    """

    def __init__(self, d_model: int, n_heads: int, d_ff: int, dropout: float = 0.1,
                 generator: torch.Generator | None = None) -> None:
        super().__init__()
        if d_model % n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        self.d_model = d_model
        self.n_heads = n_heads
        self.d_head = d_model // n_heads

        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.o_proj = nn.Linear(d_model, d_model)
        self.ff_in = nn.Linear(d_model, d_ff)
        self.ff_out = nn.Linear(d_ff, d_model)
        self.norm_attn = nn.LayerNorm(d_model)
        self.norm_ff = nn.LayerNorm(d_model)
        self.dropout = nn.Dropout(dropout)
        self.reset_parameters(generator)

    def reset_parameters(self, generator: torch.Generator | None = None) -> None:
        for layer in (self.q_proj, self.k_proj, self.v_proj, self.o_proj,
                      self.ff_in, self.ff_out):
            init_linear(layer, generator)

    def attention(self, x: torch.Tensor, mask: torch.Tensor
                  ) -> tuple[torch.Tensor, torch.Tensor]:
        """Multi-head scaled dot-product attention.

        Returns the per-position context (before the output projection) and
        the attention probabilities with shape (batch, heads, seq, seq).
        """
        batch, seq, _ = x.shape

        def split_heads(t: torch.Tensor) -> torch.Tensor:
            return t.view(batch, seq, self.n_heads, self.d_head).transpose(1, 2)

        q = split_heads(self.q_proj(x))
        k = split_heads(self.k_proj(x))
        v = split_heads(self.v_proj(x))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        key_bias = torch.where(
            mask.bool(), torch.zeros((), dtype=x.dtype, device=x.device),
            torch.full((), float("-inf"), dtype=x.dtype, device=x.device))
        scores = scores + key_bias[:, None, None, :]
        probs = torch.softmax(scores, dim=-1)
        context = (probs @ v).transpose(1, 2).reshape(batch, seq, self.d_model)
        return context, probs

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        context, _ = self.attention(x, mask)
        attended = self.norm_attn(x + self.dropout(self.o_proj(context)))
        ff = self.ff_out(F.gelu(self.ff_in(attended)))
        return self.norm_ff(attended + self.dropout(ff))


class EncoderStack(nn.Module):
    """L transformer layers interleaved with cross-stream interactions."""

    def __init__(self, n_layers: int, d_model: int, n_heads: int, d_ff: int,
                 dropout: float = 0.1, interaction_windows: tuple[int, ...] = (1, 3),
                 generator: torch.Generator | None = None) -> None:
        super().__init__()
        if n_layers < 1:
            raise ValueError("need at least one encoder layer")
        self.n_layers = n_layers
        self.layers = nn.ModuleList(
            TransformerLayer(d_model, n_heads, d_ff, dropout, generator)
            for _ in range(n_layers)
        )
        self.interactions = nn.ModuleList(
            HeteroInteraction(d_model, interaction_windows, generator)
            for _ in range(n_layers)
        )

    def forward(self, word: torch.Tensor, char: torch.Tensor, mask: torch.Tensor
                ) -> list[tuple[torch.Tensor, torch.Tensor]]:
        """Run the stack and collect (word, char) outputs at every depth.

        Padding rows of both entry streams are zeroed up front: together with
        the attention mask this keeps every output independent of whatever
        embeddings the padding positions carried.
        """
        keep = mask.to(word.dtype).unsqueeze(-1)
        word = word * keep
        char = char * keep
        outputs: list[tuple[torch.Tensor, torch.Tensor]] = []
        for layer, interact in zip(self.layers, self.interactions):
            word = layer(word, mask)
            word, char = interact(word, char)
            outputs.append((word, char))
        return outputs
