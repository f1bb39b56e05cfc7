"""Spatial pyramid attention and the classification head.

The refined map from the multi-scale stage is summarized at several grid
resolutions by adaptive average pooling, the concatenated summaries drive a
small bottleneck MLP that emits one sigmoid weight per channel, and the map
is rescaled channel-wise by those weights before the final pooled linear
classifier.

Pooling cell (a, b) of an n-sized axis covers [floor(a*n/g), floor((a+1)*n/g));
a cell that would be empty is widened to a single row or column so every cell
averages at least one element.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .nn_init import uniform_


def _cell_bounds(n: int, grid: int) -> list[tuple[int, int]]:
    bounds = []
    for a in range(grid):
        start = (a * n) // grid
        end = ((a + 1) * n) // grid
        if end <= start:
            end = start + 1
        bounds.append((start, end))
    return bounds


def adaptive_avg_pool(x: torch.Tensor, grid: int) -> torch.Tensor:
    """Average-pool a (batch, channels, H, W) map onto a grid x grid map."""
    if x.ndim != 4:
        raise ValueError(f"expected a 4-d map, got {x.ndim}-d")
    if grid < 1:
        raise ValueError("grid must be positive")
    batch, channels, height, width = x.shape
    rows = _cell_bounds(height, grid)
    cols = _cell_bounds(width, grid)
    cells = [
        x[:, :, r0:r1, c0:c1].mean(dim=(2, 3))
        for r0, r1 in rows
        for c0, c1 in cols
    ]
    return torch.stack(cells, dim=-1).reshape(batch, channels, grid, grid)


def spatial_pyramid(q: torch.Tensor, grids: tuple[int, ...] = (4, 2, 1)
                    ) -> torch.Tensor:
    """Concatenate channel-major flattened poolings at each grid size.

    Output shape is (batch, channels * sum(g * g for g in grids)); for the
    default grids that is 21 entries per channel.
    """
    if not grids:
        raise ValueError("need at least one grid size")
    batch = q.shape[0]
    parts = [adaptive_avg_pool(q, g).reshape(batch, -1) for g in grids]
    return torch.cat(parts, dim=1)


def pyramid_width(channels: int, grids: tuple[int, ...]) -> int:
    return channels * sum(g * g for g in grids)


class PyramidAttention(nn.Module):
    """Bottleneck MLP from pyramid summary to per-channel sigmoid weights."""

    def __init__(self, channels: int, grids: tuple[int, ...] = (4, 2, 1),
                 hidden_factor: int = 4, inner_gelu: bool = True,
                 generator: torch.Generator | None = None) -> None:
        super().__init__()
        if hidden_factor < 1:
            raise ValueError("hidden_factor must be positive")
        self.channels = channels
        self.grids = tuple(grids)
        self.inner_gelu = inner_gelu
        self.hidden = hidden_factor * channels
        in_width = pyramid_width(channels, self.grids)
        self.fc_in_weight = nn.Parameter(torch.empty(self.hidden, in_width))
        self.fc_in_bias = nn.Parameter(torch.zeros(self.hidden))
        self.fc_out_weight = nn.Parameter(torch.empty(channels, self.hidden))
        self.fc_out_bias = nn.Parameter(torch.zeros(channels))
        uniform_(self.fc_in_weight, in_width, generator)
        uniform_(self.fc_out_weight, self.hidden, generator)

    def _input_columns(self, k: int) -> torch.Tensor:
        """Pyramid-vector indices covering the deepest k channels."""
        cols: list[int] = []
        offset = 0
        for g in self.grids:
            cells = g * g
            for c in range(self.channels - k, self.channels):
                start = offset + c * cells
                cols.extend(range(start, start + cells))
            offset += self.channels * cells
        return torch.tensor(cols, dtype=torch.long)

    def forward(self, summary: torch.Tensor, last_k: int | None = None
                ) -> torch.Tensor:
        k = self.channels if last_k is None else last_k
        if not 1 <= k <= self.channels:
            raise ValueError(f"last_k must be in [1, {self.channels}], got {k}")
        if k == self.channels:
            w_in = self.fc_in_weight
        else:
            w_in = self.fc_in_weight[:, self._input_columns(k)]
        hidden = F.linear(summary, w_in, self.fc_in_bias)
        if self.inner_gelu:
            hidden = F.gelu(hidden)
        lo = self.channels - k
        logits = F.linear(hidden, self.fc_out_weight[lo:], self.fc_out_bias[lo:])
        return torch.sigmoid(logits)


def apply_attention(q: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """Rescale each channel of q by its attention weight."""
    if q.shape[:2] != weights.shape:
        raise ValueError("weights must be (batch, channels) matching the map")
    return q * weights[:, :, None, None]


class ClassifierHead(nn.Module):
    """Mean over the token axis, flatten channels, dropout, linear logits."""

    def __init__(self, channels: int, d_model: int, num_classes: int,
                 dropout: float = 0.1,
                 generator: torch.Generator | None = None) -> None:
        super().__init__()
        self.channels = channels
        self.d_model = d_model
        self.num_classes = num_classes
        self.dropout = nn.Dropout(dropout)
        self.weight = nn.Parameter(torch.empty(num_classes, channels * d_model))
        self.bias = nn.Parameter(torch.zeros(num_classes))
        uniform_(self.weight, channels * d_model, generator)

    def forward(self, weighted: torch.Tensor, last_k: int | None = None
                ) -> torch.Tensor:
        k = self.channels if last_k is None else last_k
        if weighted.shape[1] != k:
            raise ValueError(f"expected {k} channels, got {weighted.shape[1]}")
        pooled = weighted.mean(dim=2)
        flat = self.dropout(pooled.reshape(pooled.shape[0], -1))
        lo = (self.channels - k) * self.d_model
        return F.linear(flat, self.weight[:, lo:], self.bias)
