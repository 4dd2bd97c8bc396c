"""Batched rotation utilities on torch tensors.

All functions accept arbitrary leading batch dimensions and preserve dtype.
Rotations are 3x3 matrices acting on column vectors; the compact network
representation keeps the first two matrix columns as a 6-vector.
"""

from __future__ import annotations

import math

import torch

from .errors import RotationError

_EPS = 1e-8


def encode_rot6(R: torch.Tensor) -> torch.Tensor:
    """Flatten the first two columns of a rotation matrix into a 6-vector."""
    return torch.cat([R[..., :, 0], R[..., :, 1]], dim=-1)


def decode_rot6(v: torch.Tensor, strict: bool = True) -> torch.Tensor:
    """Rebuild a rotation matrix from a 6-vector by Gram-Schmidt.

    The first 3-vector is normalized into column 0, the second is
    orthogonalized against it for column 1, and column 2 is their cross
    product. With strict=True a zero or collinear pair raises RotationError;
    with strict=False the norms are floored so the call stays differentiable
    on arbitrary network output.
    """
    a = v[..., 0:3]
    b = v[..., 3:6]
    na = torch.linalg.vector_norm(a, dim=-1, keepdim=True)
    if strict and bool((na < _EPS).any()):
        raise RotationError("rot6 decode: first axis has near-zero norm")
    c0 = a / na.clamp_min(_EPS)
    b_perp = b - (c0 * b).sum(-1, keepdim=True) * c0
    nb = torch.linalg.vector_norm(b_perp, dim=-1, keepdim=True)
    if strict and bool((nb < _EPS).any()):
        raise RotationError("rot6 decode: axes are collinear")
    c1 = b_perp / nb.clamp_min(_EPS)
    c2 = torch.cross(c0, c1, dim=-1)
    return torch.stack([c0, c1, c2], dim=-1)


def so3_log(R: torch.Tensor) -> torch.Tensor:
    """Axis-angle 3-vector of a rotation matrix.

    Uses atan2 of the skew part against the trace, with a Taylor branch near
    zero angle so the identity maps exactly to zero and gradients stay finite.
    Angles near pi lose axis precision, which is acceptable for frame-to-frame
    deltas at normal frame rates.
    """
    w = torch.stack(
        [
            R[..., 2, 1] - R[..., 1, 2],
            R[..., 0, 2] - R[..., 2, 0],
            R[..., 1, 0] - R[..., 0, 1],
        ],
        dim=-1,
    )
    s = 0.5 * torch.linalg.vector_norm(w, dim=-1)
    c = 0.5 * (R[..., 0, 0] + R[..., 1, 1] + R[..., 2, 2] - 1.0)
    theta = torch.atan2(s, c.clamp(-1.0, 1.0))
    small = theta < 1e-4
    # w = 2 sin(theta) * axis, so log = theta / (2 sin theta) * w.
    sin_safe = torch.where(small, torch.ones_like(theta), torch.sin(theta))
    factor_exact = theta / (2.0 * sin_safe)
    factor_series = 0.5 + theta * theta / 12.0
    factor = torch.where(small, factor_series, factor_exact)
    return factor.unsqueeze(-1) * w


def so3_exp(w: torch.Tensor) -> torch.Tensor:
    """Rodrigues exponential of an axis-angle 3-vector."""
    theta = torch.linalg.vector_norm(w, dim=-1, keepdim=True)
    small = theta < 1e-8
    axis = w / torch.where(small, torch.ones_like(theta), theta)
    K = _skew(axis)
    theta = theta.unsqueeze(-1)
    I = torch.eye(3, dtype=w.dtype, device=w.device).expand(K.shape)
    R = I + torch.sin(theta) * K + (1.0 - torch.cos(theta)) * (K @ K)
    return torch.where(small.unsqueeze(-1).expand(R.shape), I, R)


def _skew(v: torch.Tensor) -> torch.Tensor:
    z = torch.zeros_like(v[..., 0])
    return torch.stack(
        [
            torch.stack([z, -v[..., 2], v[..., 1]], dim=-1),
            torch.stack([v[..., 2], z, -v[..., 0]], dim=-1),
            torch.stack([-v[..., 1], v[..., 0], z], dim=-1),
        ],
        dim=-2,
    )


def _axis_rotation(angle: torch.Tensor, axis: str) -> torch.Tensor:
    c = torch.cos(angle)
    s = torch.sin(angle)
    one = torch.ones_like(angle)
    zero = torch.zeros_like(angle)
    if axis == "x":
        rows = [[one, zero, zero], [zero, c, -s], [zero, s, c]]
    elif axis == "y":
        rows = [[c, zero, s], [zero, one, zero], [-s, zero, c]]
    elif axis == "z":
        rows = [[c, -s, zero], [s, c, zero], [zero, zero, one]]
    else:
        raise ValueError(f"unknown axis {axis!r}")
    return torch.stack([torch.stack(r, dim=-1) for r in rows], dim=-2)


def euler_to_matrix(angles_deg: torch.Tensor, order: str) -> torch.Tensor:
    """Compose per-axis rotations in the given channel order, leftmost first.

    angles_deg has the same trailing length as order, in degrees.
    """
    rad = angles_deg * (math.pi / 180.0)
    R = None
    for k, axis in enumerate(order.lower()):
        Rk = _axis_rotation(rad[..., k], axis)
        R = Rk if R is None else R @ Rk
    return R


def matrix_to_euler_zxy(R: torch.Tensor) -> torch.Tensor:
    """Decompose R = Rz @ Rx @ Ry into degrees (z, x, y order).

    For sin(x) within 1e-7 of +-1 the y angle is folded into z (gimbal case).
    """
    sx = R[..., 2, 1]
    sx = sx.clamp(-1.0, 1.0)
    x = torch.asin(sx)
    cx_ok = sx.abs() < 1.0 - 1e-7
    z = torch.where(
        cx_ok,
        torch.atan2(-R[..., 0, 1], R[..., 1, 1]),
        torch.atan2(R[..., 1, 0], R[..., 0, 0]),
    )
    y = torch.where(
        cx_ok,
        torch.atan2(-R[..., 2, 0], R[..., 2, 2]),
        torch.zeros_like(x),
    )
    return torch.stack([z, x, y], dim=-1) * (180.0 / math.pi)


def yaw_matrix(angle: torch.Tensor | float) -> torch.Tensor:
    """Rotation about the world up axis (+Y)."""
    if not torch.is_tensor(angle):
        angle = torch.tensor(float(angle), dtype=torch.float64)
    return _axis_rotation(angle, "y")


def signed_yaw_between(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Signed angle from horizontal direction a to b about +Y."""
    cross_y = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    dot = a[..., 0] * b[..., 0] + a[..., 2] * b[..., 2]
    return torch.atan2(cross_y, dot)
