"""Character-agnostic context mapping.

A per-patch two-layer MLP followed by instance normalization across the patch
axis: every output channel has zero mean and unit variance over the patches,
which removes per-character feature statistics and leaves the layout of the
motion in context space.
"""

from __future__ import annotations

import hashlib

import torch
from torch import nn

from ..config import ModelConfig
from .layers import zero_biases

_STD_FLOOR = 1e-5


def instance_norm_patches(m: torch.Tensor) -> torch.Tensor:
    """Normalize (..., N, C) to zero mean and unit variance over the N axis."""
    mu = m.mean(dim=-2, keepdim=True)
    sd = m.std(dim=-2, unbiased=False, keepdim=True).clamp_min(_STD_FLOOR)
    return (m - mu) / sd


class ContextMap(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.mlp = nn.Sequential(
            nn.Linear(config.C, config.C), nn.GELU(), nn.Linear(config.C, config.C)
        )
        zero_biases(self)

    def forward(self, z):
        return instance_norm_patches(self.mlp(z))


def params_fingerprint(module: nn.Module) -> str:
    """Stable short hash of a module's parameters, for artifact version stamps."""
    digest = hashlib.sha256()
    for name, p in sorted(module.state_dict().items()):
        digest.update(name.encode())
        digest.update(p.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()[:16]
