"""Motion clips and the per-frame reference frame on the ground plane."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .errors import DataError, DegenerateFacingError
from .kinematics import fk
from .rotations import yaw_matrix
from .skeleton import Skeleton

UP = torch.tensor([0.0, 1.0, 0.0], dtype=torch.float64)

_FACING_TOL = 1e-6


@dataclass
class MotionClip:
    """A rigid-skeleton motion: root trajectory plus per-joint local rotations.

    root_pos is the pelvis world position (F, 3); rotations is (F, J, 3, 3)
    with entry 0 holding the pelvis world orientation and the rest
    parent-relative joint rotations. Both are float64. Units are meters and
    seconds with +Y up and the ground at y = 0.
    """

    skeleton: Skeleton
    fps: float
    root_pos: torch.Tensor
    rotations: torch.Tensor
    character_id: str = ""
    action_label: str = ""
    emotion_label: str = ""
    clip_id: str = ""

    def __post_init__(self):
        F = self.root_pos.shape[0]
        J = self.skeleton.n_joint
        if tuple(self.root_pos.shape) != (F, 3):
            raise DataError(f"root_pos must be (F, 3), got {tuple(self.root_pos.shape)}")
        if tuple(self.rotations.shape) != (F, J, 3, 3):
            raise DataError(
                f"rotations must be ({F}, {J}, 3, 3), got {tuple(self.rotations.shape)}"
            )
        if self.fps <= 0:
            raise DataError(f"fps must be positive, got {self.fps}")
        self.root_pos = self.root_pos.to(torch.float64)
        self.rotations = self.rotations.to(torch.float64)

    @property
    def n_frames(self) -> int:
        return int(self.root_pos.shape[0])

    @property
    def h(self) -> float:
        return 1.0 / self.fps

    def local_translations(self) -> torch.Tensor:
        """Per-frame parent-relative translations (F, J, 3): root position plus rest offsets."""
        F = self.n_frames
        t = self.skeleton.rest_offset.expand(F, -1, -1).clone()
        t[:, 0] = self.root_pos
        return t

    def world(self) -> tuple[torch.Tensor, torch.Tensor]:
        """World joint positions (F, J, 3) and rotations (F, J, 3, 3)."""
        return fk(self.rotations, self.local_translations(), self.skeleton.parent_index)


@dataclass
class RootFrame:
    """Ground-plane reference frame: origin under the pelvis, +Y up, z toward facing."""

    origin: torch.Tensor
    rotation: torch.Tensor

    @property
    def facing(self) -> torch.Tensor:
        return self.rotation[:, 2]

    def to_local(self, points: torch.Tensor) -> torch.Tensor:
        """Express world points (..., 3) in this frame."""
        return (points - self.origin) @ self.rotation

    def rotations_to_local(self, R: torch.Tensor) -> torch.Tensor:
        """Express world rotations (..., 3, 3) in this frame."""
        return torch.einsum("ji,...jl->...il", self.rotation, R)


def facing_from_hips(hip_left: torch.Tensor, hip_right: torch.Tensor) -> torch.Tensor | None:
    """Unit facing direction from world hip positions, or None when degenerate.

    The hip axis crossed with up is horizontal by construction; it degenerates
    when the hips are vertically aligned.
    """
    d = hip_left - hip_right
    f = torch.stack([-d[..., 2], torch.zeros_like(d[..., 0]), d[..., 0]], dim=-1)
    n = torch.linalg.vector_norm(f, dim=-1, keepdim=True)
    if float(n.min()) < _FACING_TOL:
        return None
    return f / n


def frame_from_facing(pelvis_pos: torch.Tensor, facing: torch.Tensor) -> RootFrame:
    origin = torch.stack(
        [pelvis_pos[0], torch.zeros((), dtype=pelvis_pos.dtype), pelvis_pos[2]]
    )
    up = UP.to(pelvis_pos.dtype)
    lateral = torch.stack([facing[2], torch.zeros_like(facing[0]), -facing[0]])
    rotation = torch.stack([lateral, up, facing], dim=-1)
    return RootFrame(origin=origin, rotation=rotation)


def compute_root_frame(clip: MotionClip, i: int) -> RootFrame:
    """Reference frame at frame i: pelvis ground projection, hip-derived facing.

    When the hip axis is vertical at frame i the facing falls back to the
    nearest earlier frame with a valid one; DegenerateFacingError if none exists.
    """
    if not 0 <= i < clip.n_frames:
        raise DataError(f"frame {i} out of range for clip with {clip.n_frames} frames")
    positions, _ = clip.world()
    hl, hr = clip.skeleton.hip_joints()
    facing = None
    for t in range(i, -1, -1):
        facing = facing_from_hips(positions[t, hl], positions[t, hr])
        if facing is not None:
            break
    if facing is None:
        raise DegenerateFacingError(
            f"no frame up to {i} has a horizontally separated hip axis"
        )
    return frame_from_facing(clip.root_pos[i], facing)


def transform_clip(
    clip: MotionClip, yaw_deg: float = 0.0, translation=(0.0, 0.0, 0.0)
) -> MotionClip:
    """Apply a global yaw about +Y and a horizontal translation to a clip."""
    t = torch.as_tensor(translation, dtype=torch.float64)
    if abs(float(t[1])) > 0:
        raise DataError("global translation must be horizontal")
    R = yaw_matrix(torch.tensor(yaw_deg * torch.pi / 180.0, dtype=torch.float64))
    rotations = clip.rotations.clone()
    rotations[:, 0] = R @ rotations[:, 0]
    return MotionClip(
        skeleton=clip.skeleton,
        fps=clip.fps,
        root_pos=clip.root_pos @ R.T + t,
        rotations=rotations,
        character_id=clip.character_id,
        action_label=clip.action_label,
        emotion_label=clip.emotion_label,
        clip_id=clip.clip_id,
    )
