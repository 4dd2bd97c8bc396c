import math

import pytest
import torch

from mocha.errors import RotationError
from mocha.rotations import (
    decode_rot6,
    encode_rot6,
    euler_to_matrix,
    matrix_to_euler_zxy,
    signed_yaw_between,
    so3_exp,
    so3_log,
    yaw_matrix,
)

from conftest import random_rotations


def test_identity_encodes_to_unit_columns():
    v = encode_rot6(torch.eye(3, dtype=torch.float64))
    assert torch.equal(v, torch.tensor([1.0, 0, 0, 0, 1, 0], dtype=torch.float64))


def test_rot6_round_trip_on_random_rotations():
    R = random_rotations(500, seed=3)
    back = decode_rot6(encode_rot6(R))
    assert (back - R).abs().max() < 1e-6


def test_decode_is_orthonormal_even_for_unnormalized_input():
    gen = torch.Generator().manual_seed(5)
    v = torch.randn(200, 6, generator=gen, dtype=torch.float64) * 3.0
    R = decode_rot6(v)
    eye = torch.eye(3, dtype=torch.float64).expand(200, 3, 3)
    assert (R.transpose(-1, -2) @ R - eye).abs().max() < 1e-9
    assert (torch.linalg.det(R) - 1.0).abs().max() < 1e-9


def test_decode_rejects_collinear_axes():
    v = torch.tensor([1.0, 0, 0, 2.0, 0, 0], dtype=torch.float64)
    with pytest.raises(RotationError):
        decode_rot6(v)
    with pytest.raises(RotationError):
        decode_rot6(torch.zeros(6, dtype=torch.float64))


def test_so3_log_exp_round_trip():
    gen = torch.Generator().manual_seed(7)
    w = torch.randn(300, 3, generator=gen, dtype=torch.float64)
    w = w / w.norm(dim=-1, keepdim=True) * torch.rand(300, 1, generator=gen, dtype=torch.float64) * 3.0
    back = so3_log(so3_exp(w))
    assert (back - w).abs().max() < 1e-8


def test_so3_log_identity_is_exactly_zero():
    assert torch.equal(so3_log(torch.eye(3, dtype=torch.float64)), torch.zeros(3, dtype=torch.float64))


def test_euler_round_trip_via_matrices():
    R = random_rotations(400, seed=9)
    angles = matrix_to_euler_zxy(R)
    back = euler_to_matrix(angles, "zxy")
    assert (back - R).abs().max() < 1e-8


def test_yaw_sign_convention():
    # Positive yaw turns +Z toward +X.
    R = yaw_matrix(torch.tensor(0.3, dtype=torch.float64))
    z = torch.tensor([0.0, 0.0, 1.0], dtype=torch.float64)
    turned = R @ z
    assert turned[0] > 0
    ang = signed_yaw_between(z, turned)
    assert abs(float(ang) - 0.3) < 1e-12
