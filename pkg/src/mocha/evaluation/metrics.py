"""Scalar quality metrics for characterized motion.

Continuity scores a feature rollout by its frame-to-frame jumps; the
bone-length error compares the skeleton proportions a parent-relative
stream implies against a target skeleton; the gait amplitude reads the
peak hip swing angle off a clip.
"""

from __future__ import annotations

import torch

from ..clip import MotionClip
from ..errors import DataError
from ..rotations import so3_log
from ..skeleton import Skeleton
from ..windows import bone_lengths_from_y

LENGTH_TOL = 1e-6


def continuity(rollout) -> dict[str, float]:
    """Max and mean Frobenius jump between consecutive rollout features."""
    if not torch.is_tensor(rollout):
        rollout = torch.stack(list(rollout))
    if rollout.shape[0] < 2:
        raise DataError("continuity needs a rollout of at least 2 features")
    diffs = rollout[1:] - rollout[:-1]
    norms = torch.linalg.vector_norm(
        diffs.reshape(diffs.shape[0], -1).to(torch.float64), dim=-1
    )
    return {"max": float(norms.max()), "mean": float(norms.mean())}


def bone_length_error(y: torch.Tensor, target: Skeleton) -> float:
    """Mean relative error of implied bone lengths against target rest bones.

    y is a parent-relative stream (T, J, 15) or a batch of them. The pelvis
    row is root-relative rather than a bone, so the root and any zero-length
    target bones are excluded.
    """
    lens = bone_lengths_from_y(y)
    lens = lens.reshape(-1, lens.shape[-1]).mean(dim=0)
    ref = target.bone_lengths().to(lens.dtype)
    keep = ref > LENGTH_TOL
    keep[0] = False
    if not keep.any():
        raise DataError("target skeleton has no measurable bones")
    rel = (lens[keep] - ref[keep]).abs() / ref[keep]
    return float(rel.mean())


def gait_amplitude(clip: MotionClip) -> float:
    """Peak hip swing: max over frames of the mean hip-joint rotation angle."""
    hl, hr = clip.skeleton.hip_joints()
    rots = clip.rotations[:, [hl, hr]]
    angles = torch.linalg.vector_norm(so3_log(rots), dim=-1)
    return float(angles.mean(dim=1).max())
