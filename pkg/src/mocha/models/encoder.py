"""Body-part patch embedding and the motion feature encoder.

A window's reference-relative stream (B, T, J, 15) is embedded by two graph
convolution + strided temporal convolution stages (each halving the window),
pooled from joints to the six body parts, and flattened time-major into
(T/4 * 6) patch tokens of width C with a learned positional encoding.
Two self-attention layers then mix the patches into the motion feature z.
"""

from __future__ import annotations

import torch
from torch import nn

from ..config import FRAME_CHANNELS, BODY_PARTS, ModelConfig
from ..skeleton import Skeleton
from .layers import TransformerBlock, zero_biases


class STGCNBlock(nn.Module):
    """One spatial graph aggregation + channel map, then a stride-2 temporal conv."""

    def __init__(self, c_in: int, c_out: int, adjacency: torch.Tensor, kt: int = 5):
        super().__init__()
        self.register_buffer("A", adjacency)
        self.spatial = nn.Linear(c_in, c_out)
        self.temporal = nn.Conv1d(c_out, c_out, kt, stride=2, padding=kt // 2)
        self.act = nn.GELU()
        # He gain: the graph aggregation and part pooling are row-stochastic
        # averages that shrink activations, so the default init leaves patch
        # tokens far below unit scale and the first layer norm badly
        # conditioned.
        nn.init.kaiming_uniform_(self.spatial.weight, nonlinearity="relu")
        nn.init.kaiming_uniform_(self.temporal.weight, nonlinearity="relu")

    def forward(self, x):
        # x: (B, T, J, c_in)
        x = torch.einsum("jk,btkc->btjc", self.A, x)
        x = self.act(self.spatial(x))
        B, T, J, C = x.shape
        x = x.permute(0, 2, 3, 1).reshape(B * J, C, T)
        x = self.temporal(x)
        x = self.act(x)
        T2 = x.shape[-1]
        return x.reshape(B, J, C, T2).permute(0, 3, 1, 2)


class BodyPatchEmbed(nn.Module):
    def __init__(self, config: ModelConfig, skeleton: Skeleton):
        super().__init__()
        skeleton.require_full_part_cover()
        self.config = config
        A = skeleton.adjacency(torch.float32)
        self.block1 = STGCNBlock(FRAME_CHANNELS, config.C // 2, A)
        self.block2 = STGCNBlock(config.C // 2, config.C, A)
        part_idx = skeleton.part_index_of_joint()
        pool = torch.zeros(len(BODY_PARTS), skeleton.n_joint)
        pool[part_idx, torch.arange(skeleton.n_joint)] = 1.0
        pool = pool / pool.sum(dim=1, keepdim=True)
        self.register_buffer("pool", pool)
        self.pos = nn.Parameter(torch.randn(config.n_patches, config.C) * 0.02)
        zero_biases(self)

    def forward(self, x):
        """(B, T, J, 15) -> (B, (T/4)*6, C), time-major patch order."""
        B, T, J, _ = x.shape
        if T != self.config.T:
            raise ValueError(f"expected window length {self.config.T}, got {T}")
        e = self.block2(self.block1(x))
        e = torch.einsum("pj,btjc->btpc", self.pool, e)
        e = e.reshape(B, -1, self.config.C)
        return e + self.pos


class MotionEncoder(nn.Module):
    """Patch embedding followed by self-attention layers."""

    def __init__(self, config: ModelConfig, skeleton: Skeleton):
        super().__init__()
        self.config = config
        self.embed = BodyPatchEmbed(config, skeleton)
        self.blocks = nn.ModuleList(
            TransformerBlock(config) for _ in range(config.n_layers)
        )
        zero_biases(self)

    def encode_patches(self, patches):
        for blk in self.blocks:
            patches = blk(patches)
        return patches

    def forward(self, x):
        return self.encode_patches(self.embed(x))
