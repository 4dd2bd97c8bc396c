"""Root trajectory composition for characterized output.

Characterization happens in a per-frame root-relative frame, so the produced
window carries no global trajectory of its own. The output instead follows
the source's root motion: the yaw rate is copied exactly, and the linear
velocity is rescaled by the ratio of apparent hip speeds so that characters
with different stride lengths neither skate nor moonwalk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .clip import RootFrame
from .rotations import yaw_matrix
from .skeleton import Skeleton
from .windows import unpack

R_MAX = 3.0
SPEED_EPS = 1e-3


@dataclass
class RootState:
    """Ground-plane root transform accumulated over a rollout.

    yaw is in radians about +Y; position sits on the ground (y = 0).
    """

    yaw: float = 0.0
    position: torch.Tensor = field(
        default_factory=lambda: torch.zeros(3, dtype=torch.float64)
    )

    def rotation(self) -> torch.Tensor:
        return yaw_matrix(self.yaw)

    def frame(self) -> RootFrame:
        return RootFrame(origin=self.position.clone(), rotation=self.rotation())

    @classmethod
    def from_frame(cls, frame: RootFrame) -> "RootState":
        f = frame.facing
        yaw = float(torch.atan2(f[0], f[2]))
        return cls(yaw=yaw, position=frame.origin.clone())


def window_yaw(x: torch.Tensor, skeleton: Skeleton) -> torch.Tensor:
    """Facing yaw per frame of a root-relative window, radians, (T,).

    The last frame's yaw is zero by construction of the window frame.
    """
    pos = unpack(x)[0]
    hl, hr = skeleton.hip_joints()
    d = pos[:, hl] - pos[:, hr]
    return torch.atan2(-d[:, 2], d[:, 0])


def mean_pelvis_speed(window: torch.Tensor) -> float:
    """Mean norm of the pelvis linear-velocity channels over the window.

    The pelvis row is root-relative in both streams, so either x or y works.
    """
    lin = unpack(window)[2]
    return float(torch.linalg.vector_norm(lin[:, 0], dim=-1).mean())


def speed_ratio(source: torch.Tensor, output: torch.Tensor) -> float:
    """Output/source hip-speed ratio, clamped to [0, R_MAX]; 1 for a still source."""
    src = mean_pelvis_speed(source)
    if src < SPEED_EPS:
        return 1.0
    return min(max(mean_pelvis_speed(output) / src, 0.0), R_MAX)


def compose_root(
    source_x: torch.Tensor,
    output_y: torch.Tensor,
    skeleton: Skeleton,
    prev: RootState,
    h: float,
) -> RootState:
    """Advance the output root by one frame of the source's root motion.

    The yaw increment is the source facing's turn over its last frame, copied
    exactly. The position advances by the source pelvis's last ground-plane
    step scaled by the hip-speed ratio; the window expresses that step in the
    current frame's coordinates, so it is rotated by the new yaw. With ratio
    1 this reproduces the source trajectory to rounding error.
    """
    yaws = window_yaw(source_x, skeleton)
    dyaw = float(yaws[-1] - yaws[-2])
    r = speed_ratio(source_x, output_y)
    pos = unpack(source_x)[0]
    step = (pos[-1, 0] - pos[-2, 0]) * r
    step = torch.stack([step[0], step.new_zeros(()), step[2]])
    yaw = prev.yaw + dyaw
    position = prev.position + yaw_matrix(yaw) @ step.to(torch.float64)
    return RootState(yaw=yaw, position=position)
