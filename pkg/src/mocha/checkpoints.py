"""Parameter archives for the trained models.

One self-describing npz file per artifact: arrays keyed by module path, plus
a JSON header carrying the configuration, schema version, the context-mapper
fingerprint the artifact is tied to, and each character's output skeleton
(rest offsets averaged over that character's training clips). Writes go to a
temp file in the target directory and are renamed into place, so a crash
never leaves a half-written checkpoint behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import AblationFlags, ModelConfig
from .errors import DataError, VersionMismatchError
from .models import Characterizer, ContextMap, MotionEncoder
from .models.context import params_fingerprint
from .models.ncm import NeuralContextMatcher
from .skeleton import Skeleton
from .training.config import TrainConfig
from .training.stage1 import Stage1Result

SCHEMA_VERSION = 1


def _arrays_from(module: torch.nn.Module, prefix: str) -> dict:
    return {
        f"{prefix}/{key}": value.detach().cpu().numpy()
        for key, value in module.state_dict().items()
    }


def _load_into(module: torch.nn.Module, archive, prefix: str) -> None:
    state = {}
    lead = f"{prefix}/"
    for key in archive.files:
        if key.startswith(lead):
            state[key[len(lead):]] = torch.as_tensor(archive[key])
    module.load_state_dict(state)


def _write_atomic(path: str | Path, header: dict, arrays: dict) -> None:
    path = Path(path)
    payload = np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            np.savez(f, __header__=payload, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_header(archive, kind: str) -> dict:
    if "__header__" not in archive.files:
        raise DataError("archive has no header; not a model checkpoint")
    header = json.loads(bytes(archive["__header__"]).decode("utf-8"))
    if header.get("schema_version") != SCHEMA_VERSION:
        raise VersionMismatchError(
            f"checkpoint schema {header.get('schema_version')} unsupported "
            f"(this build reads {SCHEMA_VERSION})"
        )
    if header.get("kind") != kind:
        raise DataError(
            f"expected a {kind!r} checkpoint, found {header.get('kind')!r}"
        )
    return header


@dataclass
class Stage1Checkpoint:
    encoder: MotionEncoder
    mapper: ContextMap
    characterizer: Characterizer
    skeleton: Skeleton
    character_skeletons: dict[str, Skeleton]
    model_config: ModelConfig
    train_config: TrainConfig
    mapper_version: str


def save_stage1(
    path: str | Path,
    result: Stage1Result,
    model_config: ModelConfig,
    train_config: TrainConfig,
) -> None:
    header = {
        "schema_version": SCHEMA_VERSION,
        "kind": "stage1",
        "model_config": model_config.to_dict(),
        "train_config": train_config.to_dict(),
        "mapper_version": params_fingerprint(result.mapper),
        "skeleton": result.skeleton.to_dict(),
        "characters": {
            cid: sk.to_dict() for cid, sk in result.character_skeletons.items()
        },
    }
    arrays = {}
    arrays.update(_arrays_from(result.encoder, "encoder"))
    arrays.update(_arrays_from(result.mapper, "mapper"))
    arrays.update(_arrays_from(result.characterizer, "characterizer"))
    _write_atomic(path, header, arrays)


def load_stage1(path: str | Path) -> Stage1Checkpoint:
    with np.load(Path(path), allow_pickle=False) as archive:
        header = _read_header(archive, "stage1")
        model_config = ModelConfig.from_dict(header["model_config"])
        skeleton = Skeleton.from_dict(header["skeleton"])
        encoder = MotionEncoder(model_config, skeleton)
        mapper = ContextMap(model_config)
        characterizer = Characterizer(model_config, skeleton)
        _load_into(encoder, archive, "encoder")
        _load_into(mapper, archive, "mapper")
        _load_into(characterizer, archive, "characterizer")
    encoder.eval()
    mapper.eval()
    characterizer.eval()
    fingerprint = params_fingerprint(mapper)
    if fingerprint != header["mapper_version"]:
        raise VersionMismatchError(
            "stored mapper fingerprint does not match the loaded parameters; "
            "the checkpoint is corrupt"
        )
    return Stage1Checkpoint(
        encoder=encoder,
        mapper=mapper,
        characterizer=characterizer,
        skeleton=skeleton,
        character_skeletons={
            cid: Skeleton.from_dict(d) for cid, d in header["characters"].items()
        },
        model_config=model_config,
        train_config=TrainConfig.from_dict(header["train_config"]),
        mapper_version=header["mapper_version"],
    )


@dataclass
class NcmCheckpoint:
    ncm: NeuralContextMatcher
    character_id: str
    model_config: ModelConfig
    flags: AblationFlags
    mapper_version: str


def save_ncm(
    path: str | Path,
    ncm: NeuralContextMatcher,
    model_config: ModelConfig,
    character_id: str,
    mapper_version: str,
    train_config: TrainConfig | None = None,
) -> None:
    header = {
        "schema_version": SCHEMA_VERSION,
        "kind": "ncm",
        "model_config": model_config.to_dict(),
        "character_id": character_id,
        "mapper_version": mapper_version,
        "flags": ncm.flags.to_dict(),
    }
    if train_config is not None:
        header["train_config"] = train_config.to_dict()
    _write_atomic(path, header, _arrays_from(ncm, "ncm"))


def load_ncm(
    path: str | Path, mapper_version: str | None = None
) -> NcmCheckpoint:
    with np.load(Path(path), allow_pickle=False) as archive:
        header = _read_header(archive, "ncm")
        model_config = ModelConfig.from_dict(header["model_config"])
        flags = AblationFlags.from_dict(header["flags"])
        ncm = NeuralContextMatcher(model_config, flags=flags)
        _load_into(ncm, archive, "ncm")
    ncm.eval()
    stored = header["mapper_version"]
    if mapper_version is not None and mapper_version != stored:
        raise VersionMismatchError(
            f"matcher was trained against context mapper {stored}, "
            f"current mapper is {mapper_version}; retrain stage 2"
        )
    return NcmCheckpoint(
        ncm=ncm,
        character_id=header["character_id"],
        model_config=model_config,
        flags=flags,
        mapper_version=stored,
    )
