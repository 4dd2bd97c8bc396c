"""Forward kinematics over parent-relative joint transforms."""

from __future__ import annotations

import torch


def fk(
    rotations: torch.Tensor,
    translations: torch.Tensor,
    parent_index: list[int],
) -> tuple[torch.Tensor, torch.Tensor]:
    """Accumulate parent-relative transforms down the joint tree.

    rotations is (..., J, 3, 3) and translations (..., J, 3); entry 0 is the
    root joint's transform relative to an external base frame, so the returned
    positions (..., J, 3) and rotations (..., J, 3, 3) are expressed in that
    base. Differentiable; the joint loop is over the (small) joint count only.
    """
    out_rot = [rotations[..., 0, :, :]]
    out_pos = [translations[..., 0, :]]
    for j in range(1, len(parent_index)):
        p = parent_index[j]
        Rp = out_rot[p]
        out_rot.append(Rp @ rotations[..., j, :, :])
        out_pos.append(out_pos[p] + (Rp @ translations[..., j, :].unsqueeze(-1)).squeeze(-1))
    return torch.stack(out_pos, dim=-2), torch.stack(out_rot, dim=-3)


def fk_rest(rest_offset: torch.Tensor, parent_index: list[int]) -> torch.Tensor:
    """Joint positions of the bind pose, root at the origin."""
    J = rest_offset.shape[0]
    eye = torch.eye(3, dtype=rest_offset.dtype).expand(J, 3, 3)
    offs = rest_offset.clone()
    offs[0] = 0.0
    pos, _ = fk(eye, offs, parent_index)
    return pos
