import math

import pytest
import torch

from mocha.clip import MotionClip
from mocha.toydata import ToyCharacter, base_skeleton, generate_clip


def random_rotations(*shape, seed=0, dtype=torch.float64):
    """Orthonormal right-handed matrices via QR of Gaussian samples."""
    gen = torch.Generator().manual_seed(seed)
    M = torch.randn(*shape, 3, 3, generator=gen, dtype=dtype)
    Q, R = torch.linalg.qr(M)
    sign = torch.diagonal(R, dim1=-2, dim2=-1).sign()
    sign = torch.where(sign == 0, torch.ones_like(sign), sign)
    Q = Q * sign.unsqueeze(-2)
    det = torch.linalg.det(Q)
    Q[..., :, 0] = Q[..., :, 0] * det.unsqueeze(-1)
    return Q


def fk_homogeneous(rotations, translations, parent_index):
    """Reference forward kinematics with explicit 4x4 matrix chains, frame by frame."""
    shape = rotations.shape[:-3]
    J = rotations.shape[-3]
    rot_flat = rotations.reshape(-1, J, 3, 3)
    tr_flat = translations.reshape(-1, J, 3)
    N = rot_flat.shape[0]
    pos = torch.zeros(N, J, 3, dtype=rotations.dtype)
    rot = torch.zeros(N, J, 3, 3, dtype=rotations.dtype)
    for n in range(N):
        world = [None] * J
        for j in range(J):
            T = torch.eye(4, dtype=rotations.dtype)
            T[:3, :3] = rot_flat[n, j]
            T[:3, 3] = tr_flat[n, j]
            p = parent_index[j]
            world[j] = T if p < 0 else world[p] @ T
            pos[n, j] = world[j][:3, 3]
            rot[n, j] = world[j][:3, :3]
    return pos.reshape(*shape, J, 3), rot.reshape(*shape, J, 3, 3)


@pytest.fixture(scope="session")
def walker() -> MotionClip:
    char = ToyCharacter("walker", {}, gait_amplitude=0.5, gait_frequency=1.3)
    return generate_clip(char, "walk", seconds=4.0, fps=60.0, seed=11)


@pytest.fixture(scope="session")
def skeleton17():
    return base_skeleton()
