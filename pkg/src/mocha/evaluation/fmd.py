"""Frechet distance between Gaussian fits of pooled motion features.

The feature space is the frozen stage-1 encoder's patch features pooled by
a mean over patches; two motion sets are each summarized by a mean and a
covariance, and the distance between the two Gaussians scores how close the
sets are as distributions.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..errors import DataError

EIG_FLOOR = 1e-10


def _psd_project(matrix: torch.Tensor, floor: float) -> torch.Tensor:
    sym = 0.5 * (matrix + matrix.transpose(-1, -2))
    w, v = torch.linalg.eigh(sym)
    w = torch.clamp(w, min=floor)
    return (v * w) @ v.transpose(-1, -2)


@dataclass
class GaussianStats:
    """Mean and covariance of a pooled feature set.

    The covariance is symmetrized and eigenvalue-floored on construction, so
    the stored matrix is always symmetric positive semi-definite.
    """

    mean: torch.Tensor
    covariance: torch.Tensor

    def __post_init__(self):
        self.mean = torch.as_tensor(self.mean, dtype=torch.float64)
        self.covariance = torch.as_tensor(self.covariance, dtype=torch.float64)
        if self.mean.dim() != 1:
            raise DataError(f"mean must be a vector, got shape {tuple(self.mean.shape)}")
        d = self.mean.shape[0]
        if tuple(self.covariance.shape) != (d, d):
            raise DataError(
                f"covariance must be ({d}, {d}), got {tuple(self.covariance.shape)}"
            )
        self.covariance = _psd_project(self.covariance, EIG_FLOOR)

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    @classmethod
    def from_samples(cls, samples: torch.Tensor) -> "GaussianStats":
        samples = torch.as_tensor(samples, dtype=torch.float64)
        if samples.dim() != 2 or samples.shape[0] < 2:
            raise DataError(
                f"need a (n >= 2, d) sample matrix, got {tuple(samples.shape)}"
            )
        mean = samples.mean(dim=0)
        centered = samples - mean
        cov = centered.T @ centered / (samples.shape[0] - 1)
        return cls(mean=mean, covariance=cov)


def fmd(stats_a: GaussianStats, stats_b: GaussianStats) -> float:
    """||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)).

    The square root of the (generally non-symmetric) product is taken via an
    eigendecomposition of the symmetrized conjugate S_a^(1/2) S_b S_a^(1/2),
    which shares its eigenvalues; negatives from rounding are clipped at 0.
    """
    if stats_a.dim != stats_b.dim:
        raise DataError(
            f"stats dimensions differ: {stats_a.dim} vs {stats_b.dim}"
        )
    a, b = stats_a.covariance, stats_b.covariance
    wa, va = torch.linalg.eigh(a)
    sa_half = (va * torch.clamp(wa, min=0.0).sqrt()) @ va.T
    inner = sa_half @ b @ sa_half
    w = torch.linalg.eigvalsh(0.5 * (inner + inner.T))
    trace_sqrt = torch.clamp(w, min=0.0).sqrt().sum()
    dmu = stats_a.mean - stats_b.mean
    val = dmu.dot(dmu) + a.trace() + b.trace() - 2.0 * trace_sqrt
    return float(val)


def pooled_features(
    encoder, windows: torch.Tensor, batch_size: int = 64
) -> torch.Tensor:
    """Mean-over-patches encoder features of a window batch, (B, C)."""
    was_training = encoder.training
    encoder.eval()
    out = []
    with torch.no_grad():
        for start in range(0, windows.shape[0], batch_size):
            z = encoder(windows[start : start + batch_size])
            out.append(z.mean(dim=1))
    if was_training:
        encoder.train()
    return torch.cat(out)
