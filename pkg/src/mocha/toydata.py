"""Procedural toy motion data.

Characters are parameterized by per-part limb scales and gait settings, and
clips are built from seeded sinusoidal joint oscillations. The generator is
deterministic per (spec, seed): reruns produce identical clips, and two seeds
share skeletons while differing in phase and noise.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field, asdict
from pathlib import Path

import torch

from .bvh import write_bvh
from .clip import MotionClip
from .errors import DataError
from .rotations import euler_to_matrix
from .skeleton import Skeleton

ACTIONS = ("walk", "run", "idle", "jump")

_RAD2DEG = 180.0 / math.pi


def base_skeleton() -> Skeleton:
    """17-joint humanoid, arms hanging down, about 1.7 m tall at scale 1."""
    joints = [
        ("pelvis", -1, (0.0, 0.0, 0.0), "spine"),
        ("spine", 0, (0.0, 0.16, 0.0), "spine"),
        ("chest", 1, (0.0, 0.16, 0.0), "spine"),
        ("neck", 2, (0.0, 0.12, 0.0), "head"),
        ("head", 3, (0.0, 0.14, 0.0), "head"),
        ("left_upper_arm", 2, (0.20, 0.08, 0.0), "left_arm"),
        ("left_lower_arm", 5, (0.0, -0.28, 0.0), "left_arm"),
        ("left_hand", 6, (0.0, -0.26, 0.0), "left_arm"),
        ("right_upper_arm", 2, (-0.20, 0.08, 0.0), "right_arm"),
        ("right_lower_arm", 8, (0.0, -0.28, 0.0), "right_arm"),
        ("right_hand", 9, (0.0, -0.26, 0.0), "right_arm"),
        ("left_upper_leg", 0, (0.10, -0.06, 0.0), "left_leg"),
        ("left_lower_leg", 11, (0.0, -0.42, 0.0), "left_leg"),
        ("left_foot", 12, (0.0, -0.40, 0.0), "left_leg"),
        ("right_upper_leg", 0, (-0.10, -0.06, 0.0), "right_leg"),
        ("right_lower_leg", 14, (0.0, -0.42, 0.0), "right_leg"),
        ("right_foot", 15, (0.0, -0.40, 0.0), "right_leg"),
    ]
    return Skeleton(
        joint_names=[j[0] for j in joints],
        parent_index=[j[1] for j in joints],
        rest_offset=torch.tensor([j[2] for j in joints], dtype=torch.float64),
        bodypart_of_joint=[j[3] for j in joints],
        end_effectors={
            "head": 4,
            "left_hand": 7,
            "right_hand": 10,
            "left_foot": 13,
            "right_foot": 16,
        },
    )


@dataclass
class ToyCharacter:
    character_id: str
    limb_scale: dict[str, float] = field(default_factory=dict)
    gait_amplitude: float = 0.5
    gait_frequency: float = 1.2
    posture_offset: float = 0.0

    def skeleton(self) -> Skeleton:
        return base_skeleton().scaled(self.limb_scale)


@dataclass
class ToyDatasetSpec:
    characters: list[ToyCharacter]
    actions: list[str] = field(default_factory=lambda: ["walk", "jump"])
    seconds_per_action: float = 20.0
    fps: float = 60.0
    seed: int = 0

    def __post_init__(self):
        if len(self.characters) < 2:
            raise DataError("toy dataset needs at least two characters")
        ids = [c.character_id for c in self.characters]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate character ids")
        if not self.actions:
            raise DataError("toy dataset needs at least one action")
        for a in self.actions:
            if a not in ACTIONS:
                raise DataError(f"unknown action {a!r}; known: {ACTIONS}")
        if self.seconds_per_action * self.fps < 2:
            raise DataError("seconds_per_action too short")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ToyDatasetSpec":
        chars = [ToyCharacter(**c) for c in d["characters"]]
        rest = {k: v for k, v in d.items() if k != "characters"}
        return cls(characters=chars, **rest)

    @classmethod
    def default_pair(cls, seed: int = 0) -> "ToyDatasetSpec":
        """Two deliberately contrasting characters: compact/subtle vs long/sweeping."""
        limbs_15 = {p: 1.5 for p in ("left_arm", "right_arm", "left_leg", "right_leg")}
        return cls(
            characters=[
                ToyCharacter("alba", {}, gait_amplitude=0.35, gait_frequency=1.2),
                ToyCharacter(
                    "brund", limbs_15, gait_amplitude=0.85, gait_frequency=1.5,
                    posture_offset=0.15,
                ),
            ],
            seed=seed,
        )


def _derive_seed(seed: int, character_id: str, action: str) -> int:
    return zlib.crc32(f"{seed}/{character_id}/{action}".encode()) & 0x7FFFFFFF


def _smooth_noise(gen: torch.Generator, t: torch.Tensor, scale: float) -> torch.Tensor:
    """Sum of two slow seeded sinusoids, one noise track per call."""
    freqs = 0.3 + 1.4 * torch.rand(2, generator=gen, dtype=torch.float64)
    phases = 2 * math.pi * torch.rand(2, generator=gen, dtype=torch.float64)
    amps = scale * (0.5 + torch.rand(2, generator=gen, dtype=torch.float64))
    out = torch.zeros_like(t)
    for k in range(2):
        out += amps[k] * torch.sin(2 * math.pi * freqs[k] * t + phases[k])
    return out


def generate_clip(
    character: ToyCharacter, action: str, seconds: float, fps: float, seed: int
) -> MotionClip:
    if action not in ACTIONS:
        raise DataError(f"unknown action {action!r}")
    sk = character.skeleton()
    F = int(round(seconds * fps))
    t = torch.arange(F, dtype=torch.float64) / fps
    gen = torch.Generator().manual_seed(_derive_seed(seed, character.character_id, action))

    A = character.gait_amplitude
    f0 = character.gait_frequency
    po = character.posture_offset
    if action == "run":
        A, f0 = A * 1.3, f0 * 1.8
    elif action == "idle":
        A, f0 = A * 0.15, f0 * 0.45
    elif action == "jump":
        A, f0 = A * 0.9, f0 * 0.55

    phase0 = 2 * math.pi * float(torch.rand(1, generator=gen, dtype=torch.float64))
    phi = 2 * math.pi * f0 * t + phase0
    leg_len = float(sk.bone_lengths()[[11, 12, 13]].sum())
    pelvis_h = float(-sk.rest_offset[[11, 12, 13], 1].sum())

    def noise(scale=0.03):
        return _smooth_noise(gen, t, scale)

    rx = torch.zeros(F, sk.n_joint, dtype=torch.float64)
    ry = torch.zeros(F, sk.n_joint, dtype=torch.float64)
    rz = torch.zeros(F, sk.n_joint, dtype=torch.float64)

    if action in ("walk", "run"):
        swing = A * torch.sin(phi)
        rx[:, 11] = swing + noise()
        rx[:, 14] = -swing + noise()
        rx[:, 12] = -0.6 * A * (1 - torch.cos(phi)) / 2 + noise(0.02)
        rx[:, 15] = -0.6 * A * (1 + torch.cos(phi)) / 2 + noise(0.02)
        rx[:, 5] = -0.7 * swing + noise()
        rx[:, 8] = 0.7 * swing + noise()
        rx[:, 6] = -0.3 * A * (1 + torch.sin(phi)) / 2
        rx[:, 9] = -0.3 * A * (1 - torch.sin(phi)) / 2
        ry[:, 1] = 0.10 * A * torch.sin(phi)
        speed = 1.1 * A * f0 * leg_len
        root_y = pelvis_h + 0.02 * A * torch.cos(2 * phi)
        root_z = speed * t
    elif action == "idle":
        rx[:, 5] = A * torch.sin(phi) + noise(0.01)
        rx[:, 8] = A * torch.sin(phi + 0.7) + noise(0.01)
        rx[:, 1] = 0.4 * A * torch.sin(0.7 * phi)
        rx[:, 11] = 0.2 * A * torch.sin(phi) + noise(0.008)
        rx[:, 14] = -0.2 * A * torch.sin(phi) + noise(0.008)
        root_y = pelvis_h + 0.005 * A * torch.cos(phi)
        root_z = torch.zeros_like(t)
    else:  # jump
        crouch = A * (1 + torch.cos(phi)) / 2
        rx[:, 11] = crouch + noise(0.02)
        rx[:, 14] = crouch + noise(0.02)
        rx[:, 12] = -1.6 * crouch
        rx[:, 15] = -1.6 * crouch
        rx[:, 5] = -1.1 * crouch + noise(0.02)
        rx[:, 8] = -1.1 * crouch + noise(0.02)
        rx[:, 1] = 0.35 * crouch
        hop = torch.clamp(torch.sin(phi), min=0.0)
        dip = (1 + torch.cos(phi)) / 2
        root_y = pelvis_h + leg_len * min(A, 1.0) * (0.16 * hop - 0.22 * dip)
        root_z = 0.12 * A * f0 * leg_len * t

    rx[:, 1] += po
    rx[:, 3] -= 0.5 * po
    rx[:, 2] += noise(0.015)

    angles = torch.stack([rx, ry, rz], dim=-1)
    rotations = euler_to_matrix(angles * _RAD2DEG, "xyz")
    root_pos = torch.stack([torch.zeros_like(t), root_y, root_z], dim=-1)

    return MotionClip(
        skeleton=sk,
        fps=fps,
        root_pos=root_pos,
        rotations=rotations,
        character_id=character.character_id,
        action_label=action,
        emotion_label="neutral",
        clip_id=f"{character.character_id}_{action}",
    )


def generate_dataset(spec: ToyDatasetSpec) -> list[MotionClip]:
    clips = []
    for character in spec.characters:
        for action in spec.actions:
            clips.append(
                generate_clip(character, action, spec.seconds_per_action, spec.fps, spec.seed)
            )
    return clips


def write_dataset(spec: ToyDatasetSpec, out_dir: str | Path) -> Path:
    """Write BVH clips plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for clip in generate_dataset(spec):
        name = f"{clip.clip_id}.bvh"
        write_bvh(clip, out_dir / name)
        entries.append(
            {
                "path": name,
                "character_id": clip.character_id,
                "action_label": clip.action_label,
                "emotion_label": clip.emotion_label,
            }
        )
    manifest = out_dir / "manifest.json"
    manifest.write_text(json.dumps(entries, indent=2, sort_keys=True) + "\n")
    (out_dir / "toyspec.json").write_text(
        json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    return manifest
