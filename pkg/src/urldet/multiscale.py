"""Multi-scale feature extraction over the stacked layer map.

The stacked encoder output (batch, depth, seq, d) is treated as an image with
one channel per encoder depth. A depthwise-separable convolution produces a
common base map, parallel dilated branches re-filter that base at growing
receptive fields, and the branch sums are fused back and added residually to
the input.

Parameters are stored raw rather than in Conv2d submodules so that a model
trained with all depths can be evaluated on only its deepest k channels by
slicing the kernels, without touching the stored weights.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .nn_init import uniform_

KERNEL_SIZE = 3


class DepthwiseSeparableConv(nn.Module):
    """A 3x3 depthwise convolution followed by a 1x1 pointwise convolution.

    The depthwise stage filters each channel independently at the given
    dilation rate with zero padding chosen to preserve the spatial shape.
    """

    def __init__(self, channels: int, dilation: int = 1,
                 generator: torch.Generator | None = None) -> None:
        super().__init__()
        if channels < 1 or dilation < 1:
            raise ValueError("channels and dilation must be positive")
        self.channels = channels
        self.dilation = dilation
        self.depth_weight = nn.Parameter(
            torch.empty(channels, 1, KERNEL_SIZE, KERNEL_SIZE))
        self.depth_bias = nn.Parameter(torch.zeros(channels))
        self.point_weight = nn.Parameter(torch.empty(channels, channels, 1, 1))
        self.point_bias = nn.Parameter(torch.zeros(channels))
        uniform_(self.depth_weight, KERNEL_SIZE * KERNEL_SIZE, generator)
        uniform_(self.point_weight, channels, generator)

    def forward(self, x: torch.Tensor, last_k: int | None = None) -> torch.Tensor:
        k = self.channels if last_k is None else last_k
        if not 1 <= k <= self.channels:
            raise ValueError(f"last_k must be in [1, {self.channels}], got {k}")
        if x.shape[1] != k:
            raise ValueError(f"expected {k} input channels, got {x.shape[1]}")
        lo = self.channels - k
        y = F.conv2d(x, self.depth_weight[lo:], self.depth_bias[lo:],
                     padding=self.dilation, dilation=self.dilation, groups=k)
        return F.conv2d(y, self.point_weight[lo:, lo:], self.point_bias[lo:])


class MultiScaleConv(nn.Module):
    """Common base conv, dilated branches, fusion, and a residual skip.

    forward computes
        F0 = base(M);  Fi = branch_i(F0);  S = sum(Fi) (+ F0 if configured)
        Q  = fuse(S) + M
    where fuse is a 1x1 convolution. All shapes match the input map.
    """

    def __init__(self, channels: int, rates: tuple[int, ...] = (1, 2, 4, 8),
                 include_common: bool = True,
                 generator: torch.Generator | None = None) -> None:
        super().__init__()
        if not rates:
            raise ValueError("need at least one dilation rate")
        self.channels = channels
        self.rates = tuple(rates)
        self.include_common = include_common
        self.common = DepthwiseSeparableConv(channels, 1, generator)
        self.branches = nn.ModuleList(
            DepthwiseSeparableConv(channels, r, generator) for r in self.rates)
        self.fuse_weight = nn.Parameter(torch.empty(channels, channels, 1, 1))
        self.fuse_bias = nn.Parameter(torch.zeros(channels))
        uniform_(self.fuse_weight, channels, generator)

    def forward(self, m: torch.Tensor, last_k: int | None = None) -> torch.Tensor:
        k = self.channels if last_k is None else last_k
        lo = self.channels - k
        base = self.common(m, last_k)
        total = self.branches[0](base, last_k)
        for branch in self.branches[1:]:
            total = total + branch(base, last_k)
        if self.include_common:
            total = total + base
        fused = F.conv2d(total, self.fuse_weight[lo:, lo:], self.fuse_bias[lo:])
        return fused + m
