"""Feature database: stored character features with exact context search.

Entries hold the encoded feature z and its context mapping f for sliding
windows over a character's clips, ordered by (clip_id, frame_index). Search
is brute-force exact over the Frobenius distance between full context
matrices; ties resolve to the earliest entry in that ordering. The database
records the fingerprint of the context mapper that produced it, and queries
against a different mapper version fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .clip import MotionClip
from .config import ModelConfig, SCHEMA_VERSION
from .errors import DataError, EmptyDatabaseError, VersionMismatchError
from .models.context import ContextMap, params_fingerprint
from .models.encoder import MotionEncoder
from .windows import windows_from_clip


@dataclass
class FeatureDB:
    character_id: str
    mapper_version: str
    z: torch.Tensor
    f: torch.Tensor
    clip_ids: tuple[str, ...]
    frame_indices: tuple[int, ...]
    action_labels: tuple[str, ...]

    def __post_init__(self):
        self.clip_ids = tuple(self.clip_ids)
        self.frame_indices = tuple(int(i) for i in self.frame_indices)
        self.action_labels = tuple(self.action_labels)
        n = self.z.shape[0]
        if self.f.shape[0] != n or len(self.clip_ids) != n or len(self.frame_indices) != n:
            raise DataError("feature database arrays disagree on entry count")
        if len(self.action_labels) != n:
            raise DataError("feature database arrays disagree on entry count")
        order = list(zip(self.clip_ids, self.frame_indices))
        if order != sorted(order):
            raise DataError("entries must be ordered by (clip_id, frame_index)")

    def __len__(self) -> int:
        return int(self.z.shape[0])

    def check_version(self, mapper_version: str) -> None:
        if mapper_version != self.mapper_version:
            raise VersionMismatchError(
                f"database was built with context mapper {self.mapper_version}, "
                f"query uses {mapper_version}; rebuild the database"
            )

    def nearest(
        self,
        query_f: torch.Tensor,
        action_label: str | None = None,
        mapper_version: str | None = None,
    ) -> int:
        """Index of the entry whose context matrix is Frobenius-closest to query_f."""
        if len(self) == 0:
            raise EmptyDatabaseError("cannot query an empty feature database")
        if mapper_version is not None:
            self.check_version(mapper_version)
        diff = self.f - query_f.to(self.f.dtype).unsqueeze(0)
        dists = torch.linalg.vector_norm(diff.reshape(len(self), -1), dim=1)
        if action_label is not None:
            mask = torch.tensor(
                [a == action_label for a in self.action_labels], dtype=torch.bool
            )
            if not bool(mask.any()):
                raise EmptyDatabaseError(f"no entries with action label {action_label!r}")
            dists = torch.where(mask, dists, torch.full_like(dists, float("inf")))
        return int(torch.argmin(dists))

    def entry(self, idx: int) -> dict:
        return {
            "z": self.z[idx],
            "f": self.f[idx],
            "clip_id": self.clip_ids[idx],
            "frame_index": self.frame_indices[idx],
            "action_label": self.action_labels[idx],
        }

    def successor(self, idx: int, offset: int = 1) -> int | None:
        """Index of the entry `offset` frames later in the same clip, if stored."""
        j = idx + offset
        if j >= len(self):
            return None
        if self.clip_ids[j] != self.clip_ids[idx]:
            return None
        if self.frame_indices[j] != self.frame_indices[idx] + offset:
            return None
        return j

    def save(self, path: str | Path) -> None:
        index = {
            "schema_version": SCHEMA_VERSION,
            "character_id": self.character_id,
            "mapper_version": self.mapper_version,
            "entries": [
                {
                    "clip_id": c,
                    "frame_index": int(fi),
                    "action_label": a,
                }
                for c, fi, a in zip(self.clip_ids, self.frame_indices, self.action_labels)
            ],
        }
        np.savez(
            path,
            z=self.z.numpy(),
            f=self.f.numpy(),
            index=np.frombuffer(json.dumps(index, sort_keys=True).encode(), dtype=np.uint8),
        )

    @classmethod
    def load(cls, path: str | Path) -> "FeatureDB":
        try:
            with np.load(path) as data:
                index = json.loads(bytes(data["index"]).decode())
                z = torch.from_numpy(data["z"])
                f = torch.from_numpy(data["f"])
        except (OSError, KeyError, ValueError) as e:
            raise DataError(f"cannot load feature database {path}: {e}")
        if index.get("schema_version") != SCHEMA_VERSION:
            raise VersionMismatchError(
                f"database schema {index.get('schema_version')} != {SCHEMA_VERSION}"
            )
        entries = index["entries"]
        return cls(
            character_id=index["character_id"],
            mapper_version=index["mapper_version"],
            z=z,
            f=f,
            clip_ids=[e["clip_id"] for e in entries],
            frame_indices=[e["frame_index"] for e in entries],
            action_labels=[e["action_label"] for e in entries],
        )


def build_feature_db(
    clips: list[MotionClip],
    encoder: MotionEncoder,
    mapper: ContextMap,
    config: ModelConfig,
    character_id: str,
    stride: int = 1,
    batch_size: int = 64,
) -> FeatureDB:
    """Encode sliding windows of a character's clips into a FeatureDB.

    Windows end at frames T-1, T-1+stride, ... per clip; clips are processed
    in clip_id order so the entry ordering invariant holds by construction.
    """
    clips = [c for c in clips if c.character_id == character_id]
    if not clips:
        raise EmptyDatabaseError(f"no clips for character {character_id!r}")
    ids = [c.clip_id for c in clips]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate clip_id within one character")
    clips = sorted(clips, key=lambda c: c.clip_id)
    zs, fs, clip_ids, frame_indices, labels = [], [], [], [], []
    was_training = encoder.training
    encoder.eval()
    mapper.eval()
    with torch.no_grad():
        for clip in clips:
            ends = list(range(config.T - 1, clip.n_frames, stride))
            if not ends:
                continue
            windows = windows_from_clip(clip, ends, config.T)
            xs = torch.stack([w.x for w in windows]).to(torch.float32)
            for start in range(0, len(xs), batch_size):
                xb = xs[start : start + batch_size]
                z = encoder(xb)
                zs.append(z)
                fs.append(mapper(z))
            clip_ids.extend([clip.clip_id] * len(ends))
            frame_indices.extend(ends)
            labels.extend([clip.action_label] * len(ends))
    if was_training:
        encoder.train()
        mapper.train()
    if not zs:
        raise EmptyDatabaseError(f"no windows produced for character {character_id!r}")
    return FeatureDB(
        character_id=character_id,
        mapper_version=params_fingerprint(mapper),
        z=torch.cat(zs),
        f=torch.cat(fs),
        clip_ids=clip_ids,
        frame_indices=frame_indices,
        action_labels=labels,
    )
