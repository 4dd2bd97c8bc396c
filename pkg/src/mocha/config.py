"""Model hyperparameters and shared run-time constants."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

SCHEMA_VERSION = 1

FRAME_CHANNELS = 15  # 3 translation + 6 rotation + 3 linear velocity + 3 angular velocity

BODY_PARTS = ("spine", "head", "left_arm", "right_arm", "left_leg", "right_leg")


@dataclass(frozen=True)
class ModelConfig:
    """Shapes shared by the encoder, characterizer, and context matcher.

    The window length T must be divisible by 4 because the patch embedding
    halves the temporal axis twice. Channel width C must be divisible by the
    head count.
    """

    T: int = 60
    C: int = 256
    n_body: int = 6
    n_heads: int = 4
    n_layers: int = 2
    tau: float = 0.1
    h: float = 1.0 / 60.0
    context_dim: int | None = None
    ffn_mult: int = 2
    norm_contrastive: bool = True
    pre_norm: bool = True

    def __post_init__(self):
        if self.T % 4 != 0:
            raise ValueError(f"window length T={self.T} must be divisible by 4")
        if self.C % self.n_heads != 0:
            raise ValueError(f"C={self.C} must be divisible by n_heads={self.n_heads}")

    @property
    def d_head(self) -> int:
        return self.C // self.n_heads

    @property
    def n_patches(self) -> int:
        return (self.T // 4) * self.n_body

    @property
    def ctx_dim(self) -> int:
        return self.C if self.context_dim is None else self.context_dim

    @classmethod
    def paper_scale(cls) -> "ModelConfig":
        return cls()

    @classmethod
    def desk(cls) -> "ModelConfig":
        return cls(T=16, C=64)

    @classmethod
    def tiny(cls) -> "ModelConfig":
        return cls(T=8, C=16)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class AblationFlags:
    """Wiring switches for component knock-out runs.

    Each flag disables one mechanism without changing any tensor shape, so a
    flagged run is checkpoint-compatible with the baseline.
    """

    disable_adain: bool = False
    disable_contrastive: bool = False
    disable_prior_net: bool = False
    disable_autoregression: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AblationFlags":
        return cls(**d)

    def any(self) -> bool:
        return any(asdict(self).values())
