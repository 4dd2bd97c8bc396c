"""Skeleton topology, body-part assignment, and derived lookups."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .config import BODY_PARTS
from .errors import SkeletonError

END_EFFECTOR_KEYS = ("head", "left_hand", "right_hand", "left_foot", "right_foot")


@dataclass
class Skeleton:
    """A rigid joint tree.

    joint_names, parent_index, rest_offset, and bodypart_of_joint are parallel
    over joints. parent_index[0] is -1 for the pelvis root and every other
    joint's parent precedes it, so a single forward pass accumulates the tree.
    rest_offset holds the bind translation of each joint in its parent's frame,
    in meters, as a float64 tensor of shape (n_joint, 3).
    """

    joint_names: list[str]
    parent_index: list[int]
    rest_offset: torch.Tensor
    bodypart_of_joint: list[str]
    end_effectors: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.joint_names)
        if len(self.parent_index) != n or len(self.bodypart_of_joint) != n:
            raise SkeletonError("joint arrays have mismatched lengths")
        if tuple(self.rest_offset.shape) != (n, 3):
            raise SkeletonError(f"rest_offset must be ({n}, 3)")
        if self.parent_index[0] != -1:
            raise SkeletonError("joint 0 must be the pelvis root (parent -1)")
        for j, p in enumerate(self.parent_index[1:], start=1):
            if not 0 <= p < j:
                raise SkeletonError(
                    f"joint {j} has parent {p}; parents must precede children"
                )
        for part in self.bodypart_of_joint:
            if part not in BODY_PARTS:
                raise SkeletonError(f"unknown body part {part!r}")
        for key, idx in self.end_effectors.items():
            if key not in END_EFFECTOR_KEYS:
                raise SkeletonError(f"unknown end effector {key!r}")
            if not 0 <= idx < n:
                raise SkeletonError(f"end effector {key!r} index {idx} out of range")
        self.rest_offset = self.rest_offset.to(torch.float64)

    @property
    def n_joint(self) -> int:
        return len(self.joint_names)

    def part_index_of_joint(self) -> torch.Tensor:
        """Body-part index (into BODY_PARTS) per joint, shape (n_joint,)."""
        lookup = {p: i for i, p in enumerate(BODY_PARTS)}
        return torch.tensor([lookup[p] for p in self.bodypart_of_joint], dtype=torch.long)

    def require_full_part_cover(self) -> None:
        """Raise unless every body part has at least one joint.

        Part-pooled encoders need this; bare clip handling does not.
        """
        missing = set(BODY_PARTS) - set(self.bodypart_of_joint)
        if missing:
            raise SkeletonError(f"body parts with no joints: {sorted(missing)}")

    def joints_of_part(self, part: str) -> list[int]:
        return [j for j, p in enumerate(self.bodypart_of_joint) if p == part]

    def hip_joints(self) -> tuple[int, int]:
        """(left, right) hip joints: the chain root of each leg part."""
        hips = []
        for part in ("left_leg", "right_leg"):
            members = self.joints_of_part(part)
            roots = [j for j in members if self.parent_index[j] not in members]
            if len(roots) != 1:
                raise SkeletonError(f"{part} must have exactly one chain root")
            hips.append(roots[0])
        return hips[0], hips[1]

    def children_of(self, j: int) -> list[int]:
        return [k for k, p in enumerate(self.parent_index) if p == j]

    def adjacency(self, dtype: torch.dtype = torch.float32) -> torch.Tensor:
        """Symmetrically normalized bone adjacency with self loops."""
        n = self.n_joint
        A = torch.eye(n, dtype=torch.float64)
        for j, p in enumerate(self.parent_index[1:], start=1):
            A[j, p] = 1.0
            A[p, j] = 1.0
        d = A.sum(dim=1)
        dinv = d.rsqrt()
        return (dinv[:, None] * A * dinv[None, :]).to(dtype)

    def bone_lengths(self) -> torch.Tensor:
        """Rest bone length per joint (zero for the root), shape (n_joint,)."""
        return torch.linalg.vector_norm(self.rest_offset, dim=-1)

    def scaled(self, limb_scale: dict[str, float]) -> "Skeleton":
        """New skeleton with each joint's rest offset scaled by its part factor."""
        scale = torch.tensor(
            [limb_scale.get(p, 1.0) for p in self.bodypart_of_joint],
            dtype=torch.float64,
        )
        return Skeleton(
            joint_names=list(self.joint_names),
            parent_index=list(self.parent_index),
            rest_offset=self.rest_offset * scale[:, None],
            bodypart_of_joint=list(self.bodypart_of_joint),
            end_effectors=dict(self.end_effectors),
        )

    def to_dict(self) -> dict:
        return {
            "joint_names": list(self.joint_names),
            "parent_index": list(self.parent_index),
            "rest_offset": self.rest_offset.tolist(),
            "bodypart_of_joint": list(self.bodypart_of_joint),
            "end_effectors": dict(self.end_effectors),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Skeleton":
        return cls(
            joint_names=list(d["joint_names"]),
            parent_index=[int(p) for p in d["parent_index"]],
            rest_offset=torch.tensor(d["rest_offset"], dtype=torch.float64),
            bodypart_of_joint=list(d["bodypart_of_joint"]),
            end_effectors={k: int(v) for k, v in d.get("end_effectors", {}).items()},
        )


def sparse_skeleton(full: Skeleton) -> tuple[Skeleton, list[int]]:
    """Six-joint reduction: pelvis plus head, hands, and feet as direct children.

    Returns the reduced skeleton and the source joint index each reduced joint
    was taken from. Rest offsets of the leaves are their rest-pose positions
    relative to the pelvis, so the reduced tree is a star rooted at the pelvis.
    """
    for key in END_EFFECTOR_KEYS:
        if key not in full.end_effectors:
            raise SkeletonError(f"sparse reduction needs end effector {key!r}")
    rest_world = _rest_positions(full)
    order = ["pelvis"] + list(END_EFFECTOR_KEYS)
    source = [0] + [full.end_effectors[k] for k in END_EFFECTOR_KEYS]
    part_of = {
        "pelvis": "spine",
        "head": "head",
        "left_hand": "left_arm",
        "right_hand": "right_arm",
        "left_foot": "left_leg",
        "right_foot": "right_leg",
    }
    offsets = torch.zeros(6, 3, dtype=torch.float64)
    for k, src in enumerate(source[1:], start=1):
        offsets[k] = rest_world[src] - rest_world[0]
    reduced = Skeleton(
        joint_names=order,
        parent_index=[-1, 0, 0, 0, 0, 0],
        rest_offset=offsets,
        bodypart_of_joint=[part_of[name] for name in order],
        end_effectors={k: i + 1 for i, k in enumerate(END_EFFECTOR_KEYS)},
    )
    return reduced, source


def _rest_positions(skeleton: Skeleton) -> torch.Tensor:
    pos = torch.zeros(skeleton.n_joint, 3, dtype=torch.float64)
    for j in range(1, skeleton.n_joint):
        pos[j] = pos[skeleton.parent_index[j]] + skeleton.rest_offset[j]
    return pos
