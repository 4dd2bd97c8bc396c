"""Loss weights and run configuration for both training stages."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..errors import DataError


@dataclass(frozen=True)
class LossWeights:
    lambda_id: float = 1.0
    lambda_cyc: float = 1.0
    lambda_ctr: float = 0.1
    lambda_kl: float = 1.0
    lambda_loc: float = 1.0
    lambda_rt: float = 1.0
    lambda_lvel: float = 1.0
    lambda_rvel: float = 1.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise DataError(f"loss weight {name} must be >= 0, got {value}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LossWeights":
        return cls(**d)


@dataclass(frozen=True)
class TrainConfig:
    stage1_steps: int = 400
    stage2_iterations: int = 300
    batch_size: int = 8
    learning_rate: float = 1e-4
    seq_len_s: int = 8
    seed: int = 0
    window_stride: int = 1
    log_every: int = 10
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.seq_len_s < 2:
            raise DataError(f"seq_len_s must be >= 2, got {self.seq_len_s}")
        if self.stage1_steps < 1 or self.stage2_iterations < 1:
            raise DataError("step counts must be positive")
        if self.batch_size < 1:
            raise DataError("batch_size must be positive")
        if self.learning_rate <= 0:
            raise DataError("learning_rate must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = self.weights.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "weights" in d and isinstance(d["weights"], dict):
            d["weights"] = LossWeights.from_dict(d["weights"])
        return cls(**d)
