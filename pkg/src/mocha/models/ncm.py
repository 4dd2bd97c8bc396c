"""Autoregressive conditional-VAE context matcher.

Given the previous matched character feature and the current source context,
a prior network proposes a latent distribution, and a decoder turns a latent
sample plus the same conditions into the next character feature. A posterior
network (conditioned additionally on the observed target feature) exists to
regularize the prior through a KL term during training; generation always
draws the latent from the prior, so a single feature-database lookup at
bootstrap is the only retrieval the rollout ever performs.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..config import AblationFlags, ModelConfig
from .layers import TransformerBlock, zero_biases

_SIGMA_FLOOR = 1e-4


class ConditionTrunk(nn.Module):
    """Role-tagged token groups mixed by shared-width attention layers."""

    def __init__(self, config: ModelConfig, n_groups: int):
        super().__init__()
        self.roles = nn.Parameter(torch.randn(n_groups, config.C) * 0.02)
        self.blocks = nn.ModuleList(
            TransformerBlock(config) for _ in range(config.n_layers)
        )

    def forward(self, groups: list[torch.Tensor]) -> torch.Tensor:
        tokens = torch.cat(
            [g + self.roles[i] for i, g in enumerate(groups)], dim=1
        )
        for blk in self.blocks:
            tokens = blk(tokens)
        return tokens


class GaussianHead(nn.Module):
    """Mean-pool trunk tokens into a diagonal Gaussian (mu, sigma)."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        C = config.C
        self.net = nn.Sequential(nn.Linear(C, C), nn.GELU(), nn.Linear(C, 2 * C))

    def forward(self, tokens):
        pooled = tokens.mean(dim=1)
        out = self.net(pooled)
        C = out.shape[-1] // 2
        mu = out[..., :C]
        sigma = nn.functional.softplus(out[..., C:]) + _SIGMA_FLOOR
        return mu, sigma


class PriorNet(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.trunk = ConditionTrunk(config, n_groups=2)
        self.head = GaussianHead(config)
        zero_biases(self)

    def forward(self, prev, ctx):
        return self.head(self.trunk([prev, ctx]))


class PosteriorNet(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.trunk = ConditionTrunk(config, n_groups=3)
        self.head = GaussianHead(config)
        zero_biases(self)

    def forward(self, target, prev, ctx):
        return self.head(self.trunk([target, prev, ctx]))


class NcmDecoder(nn.Module):
    """Latent + conditions to the next character feature (N patch tokens)."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.s_proj = nn.Linear(config.C, config.C)
        self.trunk = ConditionTrunk(config, n_groups=2)
        self.out = nn.Linear(config.C, config.C)
        zero_biases(self)

    def forward(self, s, prev, ctx):
        inj = self.s_proj(s).unsqueeze(1)
        tokens = self.trunk([prev + inj, ctx + inj])
        n = prev.shape[1]
        return self.out(tokens[:, :n])


@dataclass
class NcmState:
    """Carry-over between steps: the previous matched feature (N, C)."""

    prev: torch.Tensor
    character_id: str = ""
    step_index: int = 0

    @classmethod
    def initial(cls, config: ModelConfig, character_id: str = "") -> "NcmState":
        """All-zero history; the caller usually overwrites prev with a
        database lookup before the first step."""
        return cls(
            prev=torch.zeros(config.n_patches, config.C), character_id=character_id
        )

    def batched(self, b: int) -> "NcmState":
        prev = self.prev if self.prev.dim() == 3 else self.prev.unsqueeze(0)
        return NcmState(
            prev=prev.expand(b, -1, -1).contiguous(),
            character_id=self.character_id,
            step_index=self.step_index,
        )


class NeuralContextMatcher(nn.Module):
    def __init__(self, config: ModelConfig, flags: AblationFlags | None = None):
        super().__init__()
        self.config = config
        self.flags = flags or AblationFlags()
        self.prior = PriorNet(config)
        self.posterior = PosteriorNet(config)
        self.decoder = NcmDecoder(config)

    def _prev_in(self, prev):
        if self.flags.disable_autoregression:
            return torch.zeros_like(prev)
        return prev

    def prior_params(self, prev, ctx):
        squeeze = ctx.dim() == 2
        if squeeze:
            prev, ctx = prev.unsqueeze(0), ctx.unsqueeze(0)
        if self.flags.disable_prior_net:
            mu = ctx.new_zeros(ctx.shape[0], self.config.C)
            sigma = torch.ones_like(mu)
        else:
            mu, sigma = self.prior(self._prev_in(prev), ctx)
        if squeeze:
            return mu.squeeze(0), sigma.squeeze(0)
        return mu, sigma

    def posterior_params(self, target, prev, ctx):
        squeeze = ctx.dim() == 2
        if squeeze:
            target, prev, ctx = (t.unsqueeze(0) for t in (target, prev, ctx))
        mu, sigma = self.posterior(target, self._prev_in(prev), ctx)
        if squeeze:
            return mu.squeeze(0), sigma.squeeze(0)
        return mu, sigma

    def decode(self, s, prev, ctx):
        squeeze = ctx.dim() == 2
        if squeeze:
            s, prev, ctx = s.unsqueeze(0), prev.unsqueeze(0), ctx.unsqueeze(0)
        z = self.decoder(s, self._prev_in(prev), ctx)
        return z.squeeze(0) if squeeze else z

    @staticmethod
    def sample(mu, sigma, mode: str = "stochastic", generator: torch.Generator | None = None):
        if mode == "mean":
            return mu
        if mode != "stochastic":
            raise ValueError(f"unknown sampling mode {mode!r}")
        eps = torch.randn(mu.shape, generator=generator, dtype=mu.dtype, device=mu.device)
        return mu + sigma * eps

    def step(
        self,
        state: NcmState,
        ctx: torch.Tensor,
        mode: str = "stochastic",
        generator: torch.Generator | None = None,
    ) -> tuple[torch.Tensor, NcmState]:
        """One constant-time rollout step. ctx is (N, C) or (B, N, C)."""
        prev = state.prev
        if ctx.dim() == 3 and prev.dim() == 2:
            prev = prev.unsqueeze(0).expand(ctx.shape[0], -1, -1)
        mu, sigma = self.prior_params(prev, ctx)
        s = self.sample(mu, sigma, mode=mode, generator=generator)
        out = self.decode(s, prev, ctx)
        return out, NcmState(
            prev=out.detach(),
            character_id=state.character_id,
            step_index=state.step_index + 1,
        )
