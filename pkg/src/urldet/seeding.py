"""Deterministic seed derivation and thread configuration.

All randomness in a run funnels through one master seed.  Each consumer
(dataset shuffling, parameter init, dropout, adversarial sampling, ...)
derives its own child seed from a fixed label, so adding a new consumer
never perturbs the streams of existing ones.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np
import torch

THREADS_ENV_VAR = "URLDET_THREADS"


def derive_seed(master_seed: int, label: str) -> int:
    """Stable 63-bit child seed for (master_seed, label)."""
    digest = hashlib.sha256(f"{master_seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF


def numpy_rng(master_seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, label))


def torch_generator(master_seed: int, label: str) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(derive_seed(master_seed, label))
    return gen


def configure_threads() -> int:
    """Cap torch's intra-op parallelism from the URLDET_THREADS env var."""
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw:
        try:
            n = max(1, int(raw))
        except ValueError:
            n = 1
        torch.set_num_threads(n)
    return torch.get_num_threads()
