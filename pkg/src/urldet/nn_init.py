"""Shared parameter initialization: symmetric uniform weights, zero biases."""

from __future__ import annotations

import math

import torch
from torch import nn


def uniform_(tensor: torch.Tensor, fan_in: int,
             generator: torch.Generator | None = None) -> None:
    bound = 1.0 / math.sqrt(max(1, fan_in))
    with torch.no_grad():
        tensor.uniform_(-bound, bound, generator=generator)


def init_linear(layer: nn.Linear, generator: torch.Generator | None = None) -> None:
    uniform_(layer.weight, layer.in_features, generator)
    if layer.bias is not None:
        with torch.no_grad():
            layer.bias.zero_()
