"""Cross-channel interaction between word-level and character-level features.

Both channels are linearly projected, concatenated along the embedding axis,
and mixed by a bank of one-dimensional convolutions that slide over the token
axis. The mixed signal is then routed back into each channel through separate
gates with a residual connection and per-channel layer normalization, so the
two streams stay distinct while still exchanging information at every layer.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .nn_init import init_linear, uniform_


def _window_channel_split(d_model: int, windows: tuple[int, ...]) -> list[int]:
    """Spread d_model output channels across the window sizes, near-evenly."""
    base = d_model // len(windows)
    extra = d_model % len(windows)
    return [base + (1 if i < extra else 0) for i in range(len(windows))]


class HeteroInteraction(nn.Module):
    """Fuse two per-token feature streams and split them back apart.

    fuse:      t, h (batch, seq, d) -> mixed (batch, seq, d)
    separate:  residual + layer-norm update of each stream from the mix
    forward:   separate(t, h, fuse(t, h))
    """

    def __init__(self, d_model: int, windows: tuple[int, ...] = (1, 3),
                 generator: torch.Generator | None = None) -> None:
        super().__init__()
        if d_model < len(windows):
            raise ValueError("d_model must be at least the number of windows")
        for w in windows:
            if w < 1 or w % 2 == 0:
                raise ValueError(f"window sizes must be odd and positive, got {w}")
        self.d_model = d_model
        self.windows = tuple(windows)

        self.proj_word = nn.Linear(d_model, d_model)
        self.proj_char = nn.Linear(d_model, d_model)
        splits = _window_channel_split(d_model, self.windows)
        self.mix_convs = nn.ModuleList(
            nn.Conv1d(2 * d_model, out_ch, kernel_size=w, padding=w // 2)
            for out_ch, w in zip(splits, self.windows)
        )
        self.gate_word = nn.Linear(d_model, d_model)
        self.gate_char = nn.Linear(d_model, d_model)
        self.norm_word = nn.LayerNorm(d_model)
        self.norm_char = nn.LayerNorm(d_model)
        self.reset_parameters(generator)

    def reset_parameters(self, generator: torch.Generator | None = None) -> None:
        for layer in (self.proj_word, self.proj_char, self.gate_word, self.gate_char):
            init_linear(layer, generator)
        for conv in self.mix_convs:
            fan_in = conv.in_channels * conv.kernel_size[0]
            uniform_(conv.weight, fan_in, generator)
            with torch.no_grad():
                conv.bias.zero_()

    def fuse(self, word: torch.Tensor, char: torch.Tensor) -> torch.Tensor:
        if word.shape != char.shape:
            raise ValueError("word and char streams must share a shape")
        mixed = torch.cat([self.proj_word(word), self.proj_char(char)], dim=-1)
        # Conv1d slides over the token axis, so channels move to dim 1.
        mixed = mixed.transpose(1, 2)
        parts = [conv(mixed) for conv in self.mix_convs]
        return torch.tanh(torch.cat(parts, dim=1)).transpose(1, 2)

    def separate(self, word: torch.Tensor, char: torch.Tensor,
                 mixed: torch.Tensor, normalize: bool = True
                 ) -> tuple[torch.Tensor, torch.Tensor]:
        word_out = word + F.gelu(self.gate_word(mixed))
        char_out = char + F.gelu(self.gate_char(mixed))
        if normalize:
            word_out = self.norm_word(word_out)
            char_out = self.norm_char(char_out)
        return word_out, char_out

    def forward(self, word: torch.Tensor, char: torch.Tensor
                ) -> tuple[torch.Tensor, torch.Tensor]:
        return self.separate(word, char, self.fuse(word, char))
