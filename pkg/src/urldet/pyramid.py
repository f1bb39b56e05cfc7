"""Stacking per-depth feature pairs into a layer-indexed feature map.

Every encoder depth yields a word-stream and a char-stream tensor. Each pair
is squeezed back to model width by a shared size-1 convolution over the
embedding axis (a position-wise affine map), and the per-depth results are
stacked so the depth index becomes a channel axis for the convolutional
stages that follow.
"""

from __future__ import annotations

import torch
from torch import nn

from .nn_init import init_linear


class LayerFuse(nn.Module):
    """Size-1 convolution mapping concatenated (word, char) pairs to width d.

    The same kernel is applied at every depth and every token position.
    """

    def __init__(self, d_model: int, generator: torch.Generator | None = None) -> None:
        super().__init__()
        self.d_model = d_model
        self.proj = nn.Linear(2 * d_model, d_model)
        init_linear(self.proj, generator)

    def forward(self, word: torch.Tensor, char: torch.Tensor) -> torch.Tensor:
        if word.shape != char.shape:
            raise ValueError("word and char features must share a shape")
        if word.shape[-1] != self.d_model:
            raise ValueError(
                f"expected embedding width {self.d_model}, got {word.shape[-1]}")
        return self.proj(torch.cat([word, char], dim=-1))


def select_layers(outputs: list[tuple[torch.Tensor, torch.Tensor]], k: int
                  ) -> list[tuple[torch.Tensor, torch.Tensor]]:
    """Keep the deepest k of the per-depth output pairs, shallowest first."""
    if not 1 <= k <= len(outputs):
        raise ValueError(f"k must be in [1, {len(outputs)}], got {k}")
    return outputs[len(outputs) - k:]


def stack_layers(fused: list[torch.Tensor]) -> torch.Tensor:
    """Stack per-depth (batch, seq, d) maps into (batch, depth, seq, d)."""
    if not fused:
        raise ValueError("need at least one per-depth feature map")
    shape = fused[0].shape
    for f in fused[1:]:
        if f.shape != shape:
            raise ValueError("all per-depth feature maps must share a shape")
    return torch.stack(fused, dim=0).permute(1, 0, 2, 3)
