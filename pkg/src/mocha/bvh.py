"""BVH reading and writing.

This is the only clip interchange format. Parsing accepts arbitrary per-joint
rotation channel orders and position channels on the root; writing emits the
common layout (root: 3 position + ZXY rotation channels, joints: ZXY). Body
parts and end effectors, which BVH does not carry, are inferred from joint
names.
"""

from __future__ import annotations

import math
import re
from pathlib import Path

import torch

from .clip import MotionClip
from .errors import BvhParseError, DataError
from .rotations import euler_to_matrix, matrix_to_euler_zxy
from .skeleton import Skeleton

_POSITION_CHANNELS = {"Xposition": 0, "Yposition": 1, "Zposition": 2}
_ROTATION_CHANNELS = {"Xrotation": "x", "Yrotation": "y", "Zrotation": "z"}


class _Tokens:
    def __init__(self, text: str, path: str | None):
        self.path = path
        self.items: list[tuple[str, int]] = []
        for ln, line in enumerate(text.splitlines(), start=1):
            for tok in line.split():
                self.items.append((tok, ln))
        self.pos = 0

    def peek(self) -> str | None:
        return self.items[self.pos][0] if self.pos < len(self.items) else None

    @property
    def line(self) -> int:
        if self.pos < len(self.items):
            return self.items[self.pos][1]
        return self.items[-1][1] if self.items else 0

    def next(self, expect: str | None = None) -> str:
        if self.pos >= len(self.items):
            raise BvhParseError("unexpected end of file", line=self.line, path=self.path)
        tok, ln = self.items[self.pos]
        self.pos += 1
        if expect is not None and tok != expect:
            raise BvhParseError(f"expected {expect!r}, got {tok!r}", line=ln, path=self.path)
        return tok

    def next_float(self) -> float:
        val = self.next()
        try:
            return float(val)
        except ValueError:
            raise BvhParseError(f"expected a number, got {val!r}", line=self.line, path=self.path)

    def next_int(self) -> int:
        val = self.next()
        try:
            return int(val)
        except ValueError:
            raise BvhParseError(f"expected an integer, got {val!r}", line=self.line, path=self.path)


def _infer_side(name: str) -> str | None:
    low = name.lower()
    if "left" in low or low.startswith("l_") or low.endswith("_l") or low.startswith("l."):
        return "left"
    if "right" in low or low.startswith("r_") or low.endswith("_r") or low.startswith("r."):
        return "right"
    return None


_ARM_WORDS = ("arm", "hand", "shoulder", "clavicle", "collar", "elbow", "wrist")
_LEG_WORDS = ("leg", "foot", "hip", "knee", "ankle", "toe", "thigh", "shin", "calf", "upleg")
_HEAD_WORDS = ("head", "neck")


def infer_bodypart(name: str) -> str:
    low = name.lower()
    if any(w in low for w in _HEAD_WORDS):
        return "head"
    side = _infer_side(name)
    if any(w in low for w in _ARM_WORDS):
        if side is None:
            raise DataError(f"cannot infer arm side for joint {name!r}")
        return f"{side}_arm"
    if any(w in low for w in _LEG_WORDS):
        if side is None:
            raise DataError(f"cannot infer leg side for joint {name!r}")
        return f"{side}_leg"
    return "spine"


def _infer_end_effectors(names: list[str], parents: list[int], parts: list[str]) -> dict[str, int]:
    has_child = set(parents)
    leaves = [j for j in range(len(names)) if j not in has_child]
    ee: dict[str, int] = {}
    head_members = [j for j, p in enumerate(parts) if p == "head"]
    if head_members:
        ee["head"] = max(head_members)
    for part, key in (
        ("left_arm", "left_hand"),
        ("right_arm", "right_hand"),
        ("left_leg", "left_foot"),
        ("right_leg", "right_foot"),
    ):
        cand = [j for j in leaves if parts[j] == part]
        if cand:
            ee[key] = cand[0]
    return ee


def parse_bvh(path: str | Path) -> MotionClip:
    """Parse a BVH file into a MotionClip.

    Joint body parts and end effectors are inferred from names; a skeleton
    whose names defeat inference raises DataError. Errors in the file itself
    raise BvhParseError carrying the line number.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise BvhParseError(f"cannot read file: {e}", path=str(path))
    toks = _Tokens(text, str(path))

    names: list[str] = []
    parents: list[int] = []
    offsets: list[list[float]] = []
    channels: list[list[str]] = []

    toks.next("HIERARCHY")
    toks.next("ROOT")

    def parse_joint(parent: int):
        name = toks.next()
        j = len(names)
        names.append(name)
        parents.append(parent)
        toks.next("{")
        toks.next("OFFSET")
        offsets.append([toks.next_float() for _ in range(3)])
        toks.next("CHANNELS")
        n = toks.next_int()
        ch = [toks.next() for _ in range(n)]
        for c in ch:
            if c not in _POSITION_CHANNELS and c not in _ROTATION_CHANNELS:
                raise BvhParseError(f"unknown channel {c!r}", line=toks.line, path=str(path))
            if c in _POSITION_CHANNELS and parent != -1:
                raise BvhParseError(
                    f"position channel {c!r} on non-root joint {name!r} is not supported",
                    line=toks.line,
                    path=str(path),
                )
        channels.append(ch)
        while True:
            tok = toks.peek()
            if tok == "JOINT":
                toks.next()
                parse_joint(j)
            elif tok == "End":
                toks.next()
                toks.next("Site")
                toks.next("{")
                toks.next("OFFSET")
                for _ in range(3):
                    toks.next_float()
                toks.next("}")
            elif tok == "}":
                toks.next()
                return
            else:
                raise BvhParseError(
                    f"unexpected token {tok!r} in joint block", line=toks.line, path=str(path)
                )

    parse_joint(-1)
    if len(names) < 2:
        raise BvhParseError("skeleton must have at least two joints", line=toks.line, path=str(path))

    toks.next("MOTION")
    toks.next("Frames:")
    n_frames = toks.next_int()
    if n_frames <= 0:
        raise BvhParseError("frame count must be positive", line=toks.line, path=str(path))
    toks.next("Frame")
    toks.next("Time:")
    frame_time = toks.next_float()
    if frame_time <= 0:
        raise BvhParseError("frame time must be positive", line=toks.line, path=str(path))

    per_frame = sum(len(ch) for ch in channels)
    values = torch.empty(n_frames, per_frame, dtype=torch.float64)
    for f in range(n_frames):
        for k in range(per_frame):
            if toks.peek() is None:
                raise BvhParseError(
                    f"motion data ends early: expected {n_frames} frames of "
                    f"{per_frame} values, stopped in frame {f + 1}",
                    line=toks.line,
                    path=str(path),
                )
            values[f, k] = toks.next_float()
    if toks.peek() is not None:
        raise BvhParseError(
            f"trailing data after {n_frames} declared frames", line=toks.line, path=str(path)
        )

    J = len(names)
    root_pos = torch.zeros(n_frames, 3, dtype=torch.float64)
    rotations = torch.eye(3, dtype=torch.float64).expand(n_frames, J, 3, 3).clone()
    col = 0
    for j in range(J):
        rot_order = ""
        rot_cols = []
        for c in channels[j]:
            if c in _POSITION_CHANNELS:
                root_pos[:, _POSITION_CHANNELS[c]] = values[:, col]
            else:
                rot_order += _ROTATION_CHANNELS[c]
                rot_cols.append(col)
            col += 1
        if rot_order:
            angles = values[:, rot_cols]
            rotations[:, j] = euler_to_matrix(angles, rot_order)

    fps_raw = 1.0 / frame_time
    fps = float(round(fps_raw)) if abs(fps_raw - round(fps_raw)) < 1e-3 else fps_raw

    parts = [infer_bodypart(n) for n in names]
    skeleton = Skeleton(
        joint_names=names,
        parent_index=parents,
        rest_offset=torch.tensor(offsets, dtype=torch.float64),
        bodypart_of_joint=parts,
        end_effectors=_infer_end_effectors(names, parents, parts),
    )
    return MotionClip(
        skeleton=skeleton,
        fps=fps,
        root_pos=root_pos,
        rotations=rotations,
        clip_id=path.stem,
    )


def write_bvh(clip: MotionClip, path: str | Path) -> None:
    """Write a clip with the fixed channel layout (root XYZ position + ZXY rotations)."""
    sk = clip.skeleton
    for name in sk.joint_names:
        if re.search(r"\s", name):
            raise DataError(f"joint name {name!r} contains whitespace")
    lines: list[str] = ["HIERARCHY"]

    def fmt(v: float) -> str:
        return f"{v:.8f}"

    def emit_joint(j: int, depth: int):
        ind = "  " * depth
        key = "ROOT" if j == 0 else "JOINT"
        lines.append(f"{ind}{key} {sk.joint_names[j]}")
        lines.append(f"{ind}{{")
        off = sk.rest_offset[j] if j != 0 else torch.zeros(3, dtype=torch.float64)
        lines.append(
            f"{ind}  OFFSET {fmt(float(off[0]))} {fmt(float(off[1]))} {fmt(float(off[2]))}"
        )
        if j == 0:
            lines.append(
                f"{ind}  CHANNELS 6 Xposition Yposition Zposition "
                "Zrotation Xrotation Yrotation"
            )
        else:
            lines.append(f"{ind}  CHANNELS 3 Zrotation Xrotation Yrotation")
        kids = sk.children_of(j)
        if not kids:
            lines.append(f"{ind}  End Site")
            lines.append(f"{ind}  {{")
            lines.append(f"{ind}    OFFSET 0.00000000 0.00000000 0.00000000")
            lines.append(f"{ind}  }}")
        for k in kids:
            emit_joint(k, depth + 1)
        lines.append(f"{ind}}}")

    emit_joint(0, 0)
    lines.append("MOTION")
    lines.append(f"Frames: {clip.n_frames}")
    lines.append(f"Frame Time: {1.0 / clip.fps:.10f}")
    euler = matrix_to_euler_zxy(clip.rotations)
    for f in range(clip.n_frames):
        row = [fmt(float(v)) for v in clip.root_pos[f]]
        for j in range(sk.n_joint):
            row.extend(fmt(float(v)) for v in euler[f, j])
        lines.append(" ".join(row))
    Path(path).write_text("\n".join(lines) + "\n")
