"""Joint training of encoder, context mapper, and characterizer.

Each step draws a source batch and a character batch from two different
characters, computes the identity, cycle, and body-patch contrastive terms,
and takes one decoupled-weight-decay step with a linear decay of the
learning rate to zero over the run. Sampling and initialization both derive
from the run seed, so fixed-seed runs are reproducible.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import torch

from ..clip import MotionClip
from ..config import AblationFlags, ModelConfig
from ..errors import DataError
from ..models import Characterizer, ContextMap, MotionEncoder
from ..skeleton import Skeleton
from ..windows import windows_from_clip
from .config import TrainConfig
from .losses import stage1_losses


class WindowSampler:
    """Uniform window sampling over a character's clips, weighted by the
    number of valid window end frames each clip offers."""

    def __init__(self, clips: list[MotionClip], T: int, gen: torch.Generator):
        self.T = T
        self.gen = gen
        self.clips = [c for c in clips if c.rotations.shape[0] >= T]
        if not self.clips:
            raise DataError(f"no clip is long enough for {T}-frame windows")
        counts = torch.tensor(
            [float(c.rotations.shape[0] - T + 1) for c in self.clips]
        )
        self.weights = counts / counts.sum()

    def batch(self, n: int) -> tuple[torch.Tensor, torch.Tensor]:
        clip_idx = torch.multinomial(
            self.weights, n, replacement=True, generator=self.gen
        )
        by_clip: dict[int, list[int]] = {}
        for ci in clip_idx.tolist():
            frames = self.clips[ci].rotations.shape[0]
            end = int(torch.randint(self.T - 1, frames, (1,), generator=self.gen))
            by_clip.setdefault(ci, []).append(end)
        xs, ys = [], []
        for ci, ends in by_clip.items():
            for w in windows_from_clip(self.clips[ci], ends, self.T):
                xs.append(w.x)
                ys.append(w.y)
        return torch.stack(xs).float(), torch.stack(ys).float()


@dataclass
class Stage1Result:
    encoder: MotionEncoder
    mapper: ContextMap
    characterizer: Characterizer
    skeleton: Skeleton
    character_skeletons: dict[str, Skeleton]
    history: list[dict] = field(default_factory=list)


def _mean_skeleton(clips: list[MotionClip]) -> Skeleton:
    """The character's output skeleton: rest offsets averaged over its clips."""
    base = clips[0].skeleton
    offsets = torch.stack([c.skeleton.rest_offset for c in clips]).mean(dim=0)
    return Skeleton(
        joint_names=list(base.joint_names),
        parent_index=list(base.parent_index),
        rest_offset=offsets,
        bodypart_of_joint=list(base.bodypart_of_joint),
        end_effectors=dict(base.end_effectors),
    )


def _group_by_character(clips: list[MotionClip]) -> dict[str, list[MotionClip]]:
    by_char: dict[str, list[MotionClip]] = {}
    for c in clips:
        if not c.character_id:
            raise DataError(f"clip {c.clip_id!r} has no character_id")
        by_char.setdefault(c.character_id, []).append(c)
    return {k: by_char[k] for k in sorted(by_char)}


def train_stage1(
    clips: list[MotionClip],
    model_config: ModelConfig,
    train_config: TrainConfig,
    flags: AblationFlags | None = None,
    metrics_path=None,
    log=None,
) -> Stage1Result:
    by_char = _group_by_character(clips)
    if len(by_char) < 2:
        raise DataError(f"stage-1 needs at least 2 characters, got {len(by_char)}")
    names = clips[0].skeleton.joint_names
    for c in clips:
        if c.skeleton.joint_names != names:
            raise DataError("all characters must share one joint layout")

    torch.manual_seed(train_config.seed)
    skeleton = clips[0].skeleton
    encoder = MotionEncoder(model_config, skeleton)
    mapper = ContextMap(model_config)
    characterizer = Characterizer(model_config, skeleton)
    params = (
        list(encoder.parameters())
        + list(mapper.parameters())
        + list(characterizer.parameters())
    )
    opt = torch.optim.AdamW(params, lr=train_config.learning_rate)
    total = train_config.stage1_steps
    sched = torch.optim.lr_scheduler.LambdaLR(opt, lambda s: 1.0 - s / total)

    gen = torch.Generator().manual_seed(train_config.seed)
    samplers = {
        cid: WindowSampler(cl, model_config.T, gen) for cid, cl in by_char.items()
    }
    char_ids = sorted(by_char)
    parent_index = skeleton.parent_index
    weights = train_config.weights

    history = []
    sink = open(metrics_path, "w") if metrics_path else None
    t0 = time.perf_counter()
    try:
        for step in range(total):
            pair = torch.randperm(len(char_ids), generator=gen)[:2].tolist()
            src_id, cha_id = char_ids[pair[0]], char_ids[pair[1]]
            src_x, src_y = samplers[src_id].batch(train_config.batch_size)
            cha_x, cha_y = samplers[cha_id].batch(train_config.batch_size)
            losses = stage1_losses(
                encoder, mapper, characterizer, parent_index,
                src_x, src_y, cha_x, cha_y,
                weights, model_config.h, model_config.tau,
                model_config.norm_contrastive, flags,
            )
            opt.zero_grad()
            losses["total"].backward()
            opt.step()
            sched.step()
            record = {
                "step": step,
                "loss": float(losses["total"].detach()),
                "identity": float(losses["identity"].detach()),
                "cycle": float(losses["cycle"].detach()),
                "contrastive": float(losses["contrastive"].detach()),
                "lr": float(sched.get_last_lr()[0]),
                "wall": time.perf_counter() - t0,
            }
            history.append(record)
            if sink:
                sink.write(json.dumps(record) + "\n")
            if log and (step % train_config.log_every == 0 or step == total - 1):
                log(
                    f"stage1 step {step}/{total} loss {record['loss']:.4f} "
                    f"id {record['identity']:.4f} cyc {record['cycle']:.4f} "
                    f"ctr {record['contrastive']:.4f}"
                )
    finally:
        if sink:
            sink.close()

    encoder.eval()
    mapper.eval()
    characterizer.eval()
    return Stage1Result(
        encoder=encoder,
        mapper=mapper,
        characterizer=characterizer,
        skeleton=skeleton,
        character_skeletons={cid: _mean_skeleton(cl) for cid, cl in by_char.items()},
        history=history,
    )
