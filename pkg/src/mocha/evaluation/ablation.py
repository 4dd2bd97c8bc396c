"""Component knock-out runs and the toy evaluation pipeline behind them.

Each ablation variant retrains exactly the parts its flags touch under the
same seed and configuration, then scores the same metric set: identity
reconstruction from the stage-1 tail, bone-length transfer error through
nearest-neighbor matched characterization, the stage-2 value loss tail, and
rollout continuity on a scenario whose source context alternates between
two actions (the regime where database lookups jump hardest).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from ..clip import MotionClip
from ..config import AblationFlags, ModelConfig
from ..database import FeatureDB, build_feature_db
from ..errors import DataError
from ..models.ncm import NcmState, NeuralContextMatcher
from ..training import Stage1Result, Stage2Result, TrainConfig, train_stage1, train_stage2
from .metrics import bone_length_error, continuity

VARIANTS: dict[str, AblationFlags] = {
    "baseline": AblationFlags(),
    "no_adain": AblationFlags(disable_adain=True),
    "no_contrastive": AblationFlags(disable_contrastive=True),
    "no_prior_net": AblationFlags(disable_prior_net=True),
    "no_autoregression": AblationFlags(disable_autoregression=True),
}


def needs_stage1_retrain(flags: AblationFlags) -> bool:
    return flags.disable_adain or flags.disable_contrastive


@dataclass
class PipelineArtifacts:
    """Everything one end-to-end toy run produces."""

    stage1: Stage1Result
    dbs: dict[str, FeatureDB]
    stage2: Stage2Result
    source_id: str
    target_id: str
    flags: AblationFlags = field(default_factory=AblationFlags)


def run_pipeline(
    clips: list[MotionClip],
    model_config: ModelConfig,
    train_config: TrainConfig,
    flags: AblationFlags | None = None,
    stage1: Stage1Result | None = None,
    log=None,
) -> PipelineArtifacts:
    """Stage-1 training, feature databases, stage-2 training, in order.

    The first two character ids in sorted order act as source and target.
    A prebuilt stage-1 result can be passed in to share it across variants
    whose flags only touch stage 2.
    """
    flags = flags or AblationFlags()
    if stage1 is None:
        stage1 = train_stage1(clips, model_config, train_config, flags=flags, log=log)
    ids = sorted(stage1.character_skeletons)
    if len(ids) < 2:
        raise DataError("pipeline needs at least two characters")
    dbs = {
        cid: build_feature_db(
            clips,
            stage1.encoder,
            stage1.mapper,
            model_config,
            cid,
            stride=train_config.window_stride,
        )
        for cid in ids
    }
    source_id, target_id = ids[0], ids[1]
    stage2 = train_stage2(
        dbs[source_id], dbs[target_id], model_config, train_config,
        flags=flags, log=log,
    )
    return PipelineArtifacts(
        stage1=stage1,
        dbs=dbs,
        stage2=stage2,
        source_id=source_id,
        target_id=target_id,
        flags=flags,
    )


def history_tail(history: list[dict], key: str, fraction: float = 0.25) -> float:
    """Mean of a metric over the trailing fraction of a training history."""
    if not history:
        raise DataError("empty training history")
    n = max(1, int(len(history) * fraction))
    vals = [rec[key] for rec in history[-n:]]
    return float(sum(vals) / len(vals))


def alternating_context(
    source_db: FeatureDB,
    actions: tuple[str, str] = ("walk", "jump"),
    block: int = 20,
    n_blocks: int = 6,
) -> torch.Tensor:
    """Context sequence switching between two actions every `block` frames.

    Within a block, contexts advance through consecutive database entries of
    one action; each switch lands on the other action's next run. (L, N, C).
    """
    runs = {}
    for action in actions:
        idx = [i for i, a in enumerate(source_db.action_labels) if a == action]
        need = block * ((n_blocks + 1) // 2)
        if len(idx) < need:
            raise DataError(
                f"source database has {len(idx)} {action!r} entries, "
                f"needs {need} for the alternating scenario"
            )
        runs[action] = idx
    chunks = []
    cursor = {a: 0 for a in actions}
    for b in range(n_blocks):
        action = actions[b % 2]
        start = cursor[action]
        take = runs[action][start : start + block]
        cursor[action] = start + block
        chunks.append(source_db.f[list(take)])
    return torch.cat(chunks, dim=0)


def nn_rollout(target_db: FeatureDB, ctx_seq: torch.Tensor) -> torch.Tensor:
    """Per-frame nearest-neighbor feature lookup, the search baseline."""
    hits = [target_db.nearest(ctx) for ctx in ctx_seq]
    return target_db.z[hits]


def ncm_rollout(
    ncm: NeuralContextMatcher,
    target_db: FeatureDB,
    ctx_seq: torch.Tensor,
    mode: str = "mean",
    seed: int = 0,
) -> torch.Tensor:
    """Bootstrap from one database lookup, then step the matcher per frame."""
    if ctx_seq.shape[0] < 2:
        raise DataError("rollout needs at least 2 context frames")
    z0 = target_db.z[target_db.nearest(ctx_seq[0])]
    state = NcmState(prev=z0, character_id=target_db.character_id)
    gen = torch.Generator().manual_seed(seed)
    out = [z0]
    with torch.no_grad():
        for ctx in ctx_seq[1:]:
            z, state = ncm.step(state, ctx, mode=mode, generator=gen)
            out.append(z)
    return torch.stack(out)


def transfer_bone_length_error(
    arts: PipelineArtifacts, n_samples: int = 16
) -> float:
    """Bone-length error of NN-matched characterizations of source windows."""
    src_db = arts.dbs[arts.source_id]
    tgt_db = arts.dbs[arts.target_id]
    step = max(1, len(src_db) // n_samples)
    idx = list(range(0, len(src_db), step))[:n_samples]
    z_src = src_db.z[idx]
    hits = [tgt_db.nearest(src_db.f[i]) for i in idx]
    z_cha = tgt_db.z[hits]
    ch = arts.stage1.characterizer
    with torch.no_grad():
        y = ch(z_src, z_cha, arts.stage1.mapper,
               disable_adain=arts.flags.disable_adain)
    return bone_length_error(y, arts.stage1.character_skeletons[arts.target_id])


def evaluate_pipeline(
    arts: PipelineArtifacts,
    block: int = 20,
    n_blocks: int = 6,
) -> dict[str, float]:
    """The shared metric set every ablation variant reports."""
    ctx_seq = alternating_context(
        arts.dbs[arts.source_id], block=block, n_blocks=n_blocks
    )
    tgt_db = arts.dbs[arts.target_id]
    ncm_cont = continuity(ncm_rollout(arts.stage2.ncm, tgt_db, ctx_seq))
    nn_cont = continuity(nn_rollout(tgt_db, ctx_seq))
    return {
        "identity": history_tail(arts.stage1.history, "identity"),
        "bone_length_error": transfer_bone_length_error(arts),
        "zval": history_tail(arts.stage2.history, "zval"),
        "continuity_mean": ncm_cont["mean"],
        "continuity_max": ncm_cont["max"],
        "nn_continuity_mean": nn_cont["mean"],
        "nn_continuity_max": nn_cont["max"],
    }


def run_ablation(
    flags: AblationFlags,
    clips: list[MotionClip],
    model_config: ModelConfig,
    train_config: TrainConfig,
    stage1: Stage1Result | None = None,
    block: int = 20,
    n_blocks: int = 6,
    log=None,
) -> dict[str, float]:
    """Train and score one flag combination under the shared seed/config."""
    if stage1 is not None and needs_stage1_retrain(flags):
        stage1 = None
    arts = run_pipeline(
        clips, model_config, train_config, flags=flags, stage1=stage1, log=log
    )
    return evaluate_pipeline(arts, block=block, n_blocks=n_blocks)


def ablation_table(
    clips: list[MotionClip],
    model_config: ModelConfig,
    train_config: TrainConfig,
    variants: dict[str, AblationFlags] | None = None,
    block: int = 20,
    n_blocks: int = 6,
    log=None,
) -> dict[str, dict[str, float]]:
    """Metric rows for a set of named variants, sharing the baseline stage-1
    with every variant whose flags leave stage 1 untouched."""
    variants = dict(variants or VARIANTS)
    rows: dict[str, dict[str, float]] = {}
    baseline_stage1 = None
    for name, flags in variants.items():
        if log:
            log(f"ablation variant {name}")
        stage1 = None
        if not needs_stage1_retrain(flags):
            if baseline_stage1 is None:
                baseline_stage1 = train_stage1(
                    clips, model_config, train_config, log=log
                )
            stage1 = baseline_stage1
        arts = run_pipeline(
            clips, model_config, train_config, flags=flags, stage1=stage1, log=log
        )
        rows[name] = evaluate_pipeline(arts, block=block, n_blocks=n_blocks)
    return rows
