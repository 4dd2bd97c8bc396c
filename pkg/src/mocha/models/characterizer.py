"""Characterizer: adaptive instance normalization, context-mapped cross
attention, and the expansion back to a full-body parent-relative window.

The decoder block grafts a character feature onto a source feature in two
ways: AdaIN rewrites per-channel patch statistics, and cross attention reads
raw character patches addressed by context-space similarity. Queries and keys
go through the shared context mapper; values deliberately do not, so what is
retrieved keeps the character's own statistics.
"""

from __future__ import annotations

import torch
from torch import nn

from ..config import FRAME_CHANNELS, BODY_PARTS, ModelConfig
from ..skeleton import Skeleton
from .context import ContextMap
from .layers import CrossAttention, FeedForward, zero_biases

_STD_FLOOR = 1e-5


def adain_transform(
    z_src: torch.Tensor, gamma: torch.Tensor, beta: torch.Tensor
) -> torch.Tensor:
    """Replace per-channel patch statistics of z_src with (gamma, beta).

    z_src is (..., N, C); gamma and beta broadcast over the patch axis. The
    per-channel std is floored at 1e-5 so constant channels stay finite.
    """
    mu = z_src.mean(dim=-2, keepdim=True)
    sd = z_src.std(dim=-2, unbiased=False, keepdim=True).clamp_min(_STD_FLOOR)
    if gamma.dim() == z_src.dim() - 1:
        gamma = gamma.unsqueeze(-2)
        beta = beta.unsqueeze(-2)
    return gamma * (z_src - mu) / sd + beta


class AdaIN(nn.Module):
    """Learned map from pooled character statistics to (gamma, beta).

    The affine starts at zero weight with bias (1, 0): a fresh block plainly
    normalizes the source feature, and training grows the character styling.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        C = config.C
        self.affine = nn.Linear(2 * C, 2 * C)
        self.affine.keep_bias_init = True
        nn.init.zeros_(self.affine.weight)
        with torch.no_grad():
            self.affine.bias[:C] = 1.0
            self.affine.bias[C:] = 0.0

    def gamma_beta(self, z_cha):
        pooled = torch.cat(
            [
                z_cha.mean(dim=-2),
                z_cha.std(dim=-2, unbiased=False),
            ],
            dim=-1,
        )
        gb = self.affine(pooled)
        C = gb.shape[-1] // 2
        return gb[..., :C], gb[..., C:]

    def forward(self, z_src, z_cha):
        gamma, beta = self.gamma_beta(z_cha)
        return adain_transform(z_src, gamma, beta)


class DecoderBlock(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.adain = AdaIN(config)
        self.mca = CrossAttention(config.C, config.n_heads)
        self.ln = nn.LayerNorm(config.C)
        self.ffn = FeedForward(config.C, config.ffn_mult)
        self.pre_norm = config.pre_norm
        zero_biases(self)

    def forward(self, z_src, z_cha, mapper: ContextMap, disable_adain: bool = False):
        z2 = z_src if disable_adain else self.adain(z_src, z_cha)
        attn = self.mca(mapper(z2), mapper(z_cha), z_cha)
        z1 = attn + z2
        f_in = self.ln(z1) if self.pre_norm else z1
        return self.ffn(f_in) + z1


class DeSTGCNBlock(nn.Module):
    """Mirror of the embedding stage: graph aggregation, channel map, then a
    transposed temporal conv that exactly doubles the window axis."""

    def __init__(self, c_in: int, c_out: int, adjacency: torch.Tensor, kt: int = 5):
        super().__init__()
        self.register_buffer("A", adjacency)
        self.spatial = nn.Linear(c_in, c_out)
        self.temporal = nn.ConvTranspose1d(
            c_out, c_out, kt, stride=2, padding=kt // 2, output_padding=1
        )
        self.act = nn.GELU()

    def forward(self, x):
        x = torch.einsum("jk,btkc->btjc", self.A, x)
        x = self.act(self.spatial(x))
        B, T, J, C = x.shape
        x = x.permute(0, 2, 3, 1).reshape(B * J, C, T)
        x = self.act(self.temporal(x))
        T2 = x.shape[-1]
        return x.reshape(B, J, C, T2).permute(0, 3, 1, 2)


class Expand(nn.Module):
    """Patch tokens back to a parent-relative window on the output skeleton.

    Tokens are unflattened to (T/4, parts), broadcast from parts to member
    joints through per-joint learned linears, upsampled by two mirrored
    stages, and projected to the 15 pose channels.
    """

    def __init__(self, config: ModelConfig, skeleton: Skeleton):
        super().__init__()
        skeleton.require_full_part_cover()
        self.config = config
        J = skeleton.n_joint
        C = config.C
        self.register_buffer("part_of_joint", skeleton.part_index_of_joint())
        bound = C ** -0.5
        self.unpool_w = nn.Parameter(torch.empty(J, C, C).uniform_(-bound, bound))
        self.unpool_b = nn.Parameter(torch.zeros(J, C))
        A = skeleton.adjacency(torch.float32)
        self.block1 = DeSTGCNBlock(C, C // 2, A)
        self.block2 = DeSTGCNBlock(C // 2, C // 2, A)
        self.head = nn.Linear(C // 2, FRAME_CHANNELS)
        zero_biases(self)
        # Start the rotation channels at the identity encoding so fresh
        # outputs decode to well-normalized frames; near-zero 6D vectors
        # make the orthonormalization (and everything downstream of it)
        # badly conditioned.
        self.head.keep_bias_init = True
        with torch.no_grad():
            self.head.bias.zero_()
            self.head.bias[3] = 1.0
            self.head.bias[7] = 1.0

    def forward(self, z):
        B, N, C = z.shape
        cfg = self.config
        parts = z.reshape(B, cfg.T // 4, cfg.n_body, C)
        per_joint = parts[:, :, self.part_of_joint, :]
        per_joint = torch.einsum("btjc,jcd->btjd", per_joint, self.unpool_w) + self.unpool_b
        h = self.block2(self.block1(per_joint))
        return self.head(h)


class Characterizer(nn.Module):
    """Two stacked decoder blocks feeding the expansion stage."""

    def __init__(self, config: ModelConfig, skeleton: Skeleton, n_blocks: int = 2):
        super().__init__()
        self.blocks = nn.ModuleList(DecoderBlock(config) for _ in range(n_blocks))
        self.expand = Expand(config, skeleton)

    def decode_feature(self, z_src, z_cha, mapper, disable_adain: bool = False):
        z = z_src
        for blk in self.blocks:
            z = blk(z, z_cha, mapper, disable_adain=disable_adain)
        return z

    def forward(self, z_src, z_cha, mapper, disable_adain: bool = False):
        return self.expand(self.decode_feature(z_src, z_cha, mapper, disable_adain))
