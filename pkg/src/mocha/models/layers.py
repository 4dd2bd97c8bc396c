"""Shared network building blocks.

Initialization convention used across the package: uniform fan-in weights
(the torch default) with all biases zeroed, so a freshly built block maps
zero input to zero output wherever the architecture allows it.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from ..config import ModelConfig


def zero_biases(module: nn.Module) -> None:
    """Zero every Linear/conv bias except layers marked keep_bias_init."""
    for m in module.modules():
        if getattr(m, "keep_bias_init", False):
            continue
        if isinstance(m, (nn.Linear, nn.Conv1d, nn.ConvTranspose1d)) and m.bias is not None:
            nn.init.zeros_(m.bias)


class FeedForward(nn.Module):
    def __init__(self, C: int, mult: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(C, mult * C), nn.GELU(), nn.Linear(mult * C, C)
        )

    def forward(self, x):
        return self.net(x)


class SelfAttention(nn.Module):
    """Standard multi-head self-attention over (B, N, C) token sequences."""

    def __init__(self, C: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = C // n_heads
        self.qkv = nn.Linear(C, 3 * C)
        self.proj = nn.Linear(C, C)

    def forward(self, x, return_weights: bool = False):
        B, N, C = x.shape
        qkv = self.qkv(x).reshape(B, N, 3, self.n_heads, self.d_head)
        q, k, v = qkv.permute(2, 0, 3, 1, 4)
        attn = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(self.d_head), dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(B, N, C)
        out = self.proj(out)
        if return_weights:
            return out, attn
        return out


class CrossAttention(nn.Module):
    """Multi-head attention with caller-supplied query, key, and value sources."""

    def __init__(self, C: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = C // n_heads
        self.q_proj = nn.Linear(C, C, bias=False)
        self.k_proj = nn.Linear(C, C, bias=False)
        self.v_proj = nn.Linear(C, C, bias=False)
        self.proj = nn.Linear(C, C)

    def _split(self, x):
        B, N, C = x.shape
        return x.reshape(B, N, self.n_heads, self.d_head).transpose(1, 2)

    def forward(self, query, key, value, return_weights: bool = False):
        q = self._split(self.q_proj(query))
        k = self._split(self.k_proj(key))
        v = self._split(self.v_proj(value))
        attn = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(self.d_head), dim=-1)
        B, _, N, _ = q.shape
        out = (attn @ v).transpose(1, 2).reshape(B, N, self.n_heads * self.d_head)
        out = self.proj(out)
        if return_weights:
            return out, attn
        return out


class TransformerBlock(nn.Module):
    """Self-attention and feed-forward sublayers, each wrapped in a residual.

    With pre_norm a LayerNorm sits inside each branch, keeping the residual
    stream itself untouched; without it the branches read raw activations.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.pre_norm = config.pre_norm
        self.ln1 = nn.LayerNorm(config.C)
        self.ln2 = nn.LayerNorm(config.C)
        self.attn = SelfAttention(config.C, config.n_heads)
        self.ffn = FeedForward(config.C, config.ffn_mult)

    def forward(self, x, return_weights: bool = False):
        a_in = self.ln1(x) if self.pre_norm else x
        if return_weights:
            a, w = self.attn(a_in, return_weights=True)
        else:
            a, w = self.attn(a_in), None
        x = x + a
        f_in = self.ln2(x) if self.pre_norm else x
        x = x + self.ffn(f_in)
        if return_weights:
            return x, w
        return x
