"""Dual-stream motion windows.

A window covers the T frames ending at a clip frame i and expresses every
quantity in the reference frame of frame i. Two aligned streams are kept:

  x: per joint, translation, rotation, and velocities relative to the
     reference frame (shape T x n_joint x 15), and
  y: the same channel layout but parent-relative, with the pelvis row
     expressed directly in the reference frame so that forward kinematics
     over y reproduces x.

Channel layout per joint and frame: translation (3), rotation as the first
two matrix columns (6), linear velocity (3), angular velocity (3).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import torch

from .clip import MotionClip, RootFrame, compute_root_frame
from .config import FRAME_CHANNELS
from .errors import InsufficientHistoryError
from .kinematics import fk
from .rotations import decode_rot6, encode_rot6, so3_log
from .skeleton import Skeleton


@dataclass
class MotionWindow:
    x: torch.Tensor
    y: torch.Tensor
    root: RootFrame
    h: float
    skeleton: Skeleton | None = None
    end_frame: int = -1
    clip_id: str = ""
    action_label: str = ""

    @property
    def T(self) -> int:
        return int(self.x.shape[0])

    @property
    def n_joint(self) -> int:
        return int(self.x.shape[1])


def _velocities(pos: torch.Tensor, rot: torch.Tensor, h: float):
    """Backward-difference velocities along the first axis; frame 0 copies frame 1.

    Angular velocity is the axis-angle log of the frame-to-frame relative
    rotation scaled by the frame rate.
    """
    lin = (pos[1:] - pos[:-1]) / h
    rel = rot[:-1].transpose(-1, -2) @ rot[1:]
    ang = so3_log(rel) / h
    lin = torch.cat([lin[:1], lin], dim=0)
    ang = torch.cat([ang[:1], ang], dim=0)
    return lin, ang


def _pack(pos, rot, lin, ang) -> torch.Tensor:
    return torch.cat([pos, encode_rot6(rot), lin, ang], dim=-1)


def window_streams(
    pos_x: torch.Tensor,
    rot_x: torch.Tensor,
    pos_y: torch.Tensor,
    rot_y: torch.Tensor,
    h: float,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Pack reference-relative and parent-relative pose series into x and y."""
    lin_x, ang_x = _velocities(pos_x, rot_x, h)
    lin_y, ang_y = _velocities(pos_y, rot_y, h)
    return _pack(pos_x, rot_x, lin_x, ang_x), _pack(pos_y, rot_y, lin_y, ang_y)


def build_window(clip: MotionClip, i: int, T: int) -> MotionWindow:
    """Window of the T frames ending at clip frame i (inclusive)."""
    wins = windows_from_clip(clip, [i], T)
    return wins[0]


def windows_from_clip(clip: MotionClip, ends: Sequence[int], T: int) -> list[MotionWindow]:
    """Windows for several end frames, sharing one kinematics pass over the clip."""
    for i in ends:
        if i >= clip.n_frames:
            raise InsufficientHistoryError(
                f"frame {i} out of range for clip with {clip.n_frames} frames"
            )
        if i < T - 1:
            raise InsufficientHistoryError(
                f"window ending at frame {i} needs {T} frames of history"
            )
    positions, rotations_w = clip.world()
    local_t = clip.local_translations()
    out = []
    for i in ends:
        ref = compute_root_frame(clip, i)
        sl = slice(i - T + 1, i + 1)
        pos_x = ref.to_local(positions[sl])
        rot_x = ref.rotations_to_local(rotations_w[sl])
        pos_y = local_t[sl].clone()
        rot_y = clip.rotations[sl].clone()
        pos_y[:, 0] = pos_x[:, 0]
        rot_y[:, 0] = rot_x[:, 0]
        x, y = window_streams(pos_x, rot_x, pos_y, rot_y, clip.h)
        out.append(
            MotionWindow(
                x=x,
                y=y,
                root=ref,
                h=clip.h,
                skeleton=clip.skeleton,
                end_frame=i,
                clip_id=clip.clip_id,
                action_label=clip.action_label,
            )
        )
    return out


def unpack(stream: torch.Tensor):
    """Split a packed stream into (pos, rot6, linvel, angvel) views."""
    return (
        stream[..., 0:3],
        stream[..., 3:9],
        stream[..., 9:12],
        stream[..., 12:15],
    )


def fk_window(y: torch.Tensor, parent_index: list[int], h: float) -> torch.Tensor:
    """Forward kinematics over a parent-relative stream y, returning the x stream.

    Accepts (..., T, J, 15). Positions and rotations are accumulated down the
    tree; velocities are rebuilt by differencing the result along the window,
    matching the convention used when windows are built from clips.
    Differentiable, so reconstruction losses can be taken on the output.
    """
    pos_y, rot6_y, _, _ = unpack(y)
    rot_y = decode_rot6(rot6_y, strict=False)
    pos, rot = fk(rot_y, pos_y, parent_index)
    # _velocities differences along the first axis; move T there and back.
    if y.dim() == 3:
        lin, ang = _velocities(pos, rot, h)
        return _pack(pos, rot, lin, ang)
    flat_y = y.reshape(-1, *y.shape[-3:])
    pos_f = pos.reshape(-1, *pos.shape[-3:]).movedim(0, 1)
    rot_f = rot.reshape(-1, *rot.shape[-4:]).movedim(0, 1)
    lin, ang = _velocities(pos_f, rot_f, h)
    x = _pack(pos_f, rot_f, lin, ang).movedim(1, 0)
    return x.reshape(*y.shape[:-3], *x.shape[-3:])


def sparse_window(window: MotionWindow, reduced: Skeleton, source: list[int]) -> MotionWindow:
    """Restrict a full-body window to the six-joint reduction.

    The x stream is a row selection. The y stream is rebuilt against the star
    topology: leaf translations and rotations become pelvis-relative.
    """
    idx = torch.tensor(source, dtype=torch.long)
    pos_x, rot6_x, _, _ = unpack(window.x)
    rot_x = decode_rot6(rot6_x)
    pos_s = pos_x[:, idx]
    rot_s = rot_x[:, idx]
    pel_rot = rot_s[:, 0]
    pel_pos = pos_s[:, 0]
    pos_y = torch.einsum("tji,tkj->tki", pel_rot, pos_s - pel_pos[:, None, :])
    rot_y = torch.einsum("tji,tkjl->tkil", pel_rot, rot_s)
    pos_y[:, 0] = pel_pos
    rot_y[:, 0] = pel_rot
    x, y = window_streams(pos_s, rot_s, pos_y, rot_y, window.h)
    return MotionWindow(
        x=x,
        y=y,
        root=window.root,
        h=window.h,
        skeleton=reduced,
        end_frame=window.end_frame,
        clip_id=window.clip_id,
        action_label=window.action_label,
    )


def select_sparse_x(x_full: torch.Tensor, source: list[int]) -> torch.Tensor:
    """Differentiable joint-row selection of a full-body x stream."""
    idx = torch.tensor(source, dtype=torch.long, device=x_full.device)
    return x_full.index_select(-2, idx)


def bone_lengths_from_y(y: torch.Tensor) -> torch.Tensor:
    """Per-frame bone lengths implied by a parent-relative stream, (..., T, J)."""
    pos_y, _, _, _ = unpack(y)
    return torch.linalg.vector_norm(pos_y, dim=-1)
