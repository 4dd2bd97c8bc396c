"""Supervised training of the neural context matcher.

Each iteration picks a random source sequence of s+1 consecutive windows,
bootstraps the target state with a label-filtered nearest-neighbor lookup on
the first frame only, then unrolls the matcher autoregressively: at every
step the latent is drawn from the prior (reparameterized), the decoder
predicts the next target feature, and the posterior enters the objective
solely through the KL term. One optimizer update is taken per unrolled
sequence. Stage-1 models are untouched; only the databases they produced are
read.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field

import torch

from ..config import AblationFlags, ModelConfig
from ..database import FeatureDB
from ..errors import DataError, VersionMismatchError
from ..models import NeuralContextMatcher
from .config import TrainConfig
from .losses import kl_diag_gauss, l1


@dataclass
class Stage2Result:
    ncm: NeuralContextMatcher
    history: list[dict] = field(default_factory=list)
    skipped: int = 0


def unroll_losses(
    ncm: NeuralContextMatcher,
    ctx_seq: torch.Tensor,
    z_tar: torch.Tensor,
    gen: torch.Generator | None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Mean prediction L1 and mean KL over one (s+1)-window sequence.

    ctx_seq and z_tar are (s+1, N, C); index 0 is the bootstrap frame.
    """
    s = ctx_seq.shape[0] - 1
    z_prev = z_tar[0]
    loss_val = ctx_seq.new_zeros(())
    loss_kl = ctx_seq.new_zeros(())
    for i in range(1, s + 1):
        ctx = ctx_seq[i]
        mu_po, sig_po = ncm.posterior_params(z_tar[i], z_prev, ctx)
        mu_pr, sig_pr = ncm.prior_params(z_prev, ctx)
        latent = ncm.sample(mu_pr, sig_pr, mode="stochastic", generator=gen)
        z_hat = ncm.decode(latent, z_prev, ctx)
        loss_val = loss_val + l1(z_hat, z_tar[i])
        loss_kl = loss_kl + kl_diag_gauss(mu_po, sig_po, mu_pr, sig_pr)
        z_prev = z_hat
    return loss_val / s, loss_kl / s


def train_stage2(
    source_db: FeatureDB,
    target_db: FeatureDB,
    model_config: ModelConfig,
    train_config: TrainConfig,
    flags: AblationFlags | None = None,
    metrics_path=None,
    log=None,
) -> Stage2Result:
    if source_db.mapper_version != target_db.mapper_version:
        raise VersionMismatchError(
            "source and target databases come from different context mappers "
            f"({source_db.mapper_version} vs {target_db.mapper_version})"
        )
    s = train_config.seq_len_s
    starts = [
        i for i in range(len(source_db)) if source_db.successor(i, s) is not None
    ]
    if not starts:
        raise DataError(
            f"source database has no run of {s + 1} consecutive windows"
        )

    torch.manual_seed(train_config.seed)
    ncm = NeuralContextMatcher(model_config, flags=flags)
    opt = torch.optim.AdamW(ncm.parameters(), lr=train_config.learning_rate)
    total = train_config.stage2_iterations
    sched = torch.optim.lr_scheduler.LambdaLR(opt, lambda it: 1.0 - it / total)
    gen = torch.Generator().manual_seed(train_config.seed)
    lambda_kl = train_config.weights.lambda_kl

    history = []
    skipped = 0
    sink = open(metrics_path, "w") if metrics_path else None
    t0 = time.perf_counter()
    it = 0
    attempts = 0
    try:
        while it < total:
            attempts += 1
            if attempts > 10 * total + 100:
                raise DataError(
                    "stage-2 cannot find target sequences; databases too sparse"
                )
            start = starts[int(torch.randint(len(starts), (1,), generator=gen))]
            ctx_seq = source_db.f[start : start + s + 1]
            action = source_db.action_labels[start]
            hit = target_db.nearest(ctx_seq[0], action_label=action)
            if target_db.successor(hit, s) is None:
                warnings.warn(
                    f"target database lacks {s + 1} consecutive windows after "
                    f"entry {hit}; skipping sequence",
                    stacklevel=2,
                )
                skipped += 1
                continue
            z_tar = target_db.z[hit : hit + s + 1]
            loss_val, loss_kl = unroll_losses(ncm, ctx_seq, z_tar, gen)
            loss = loss_val + lambda_kl * loss_kl
            opt.zero_grad()
            loss.backward()
            opt.step()
            sched.step()
            record = {
                "step": it,
                "loss": float(loss.detach()),
                "zval": float(loss_val.detach()),
                "kl": float(loss_kl.detach()),
                "lr": float(sched.get_last_lr()[0]),
                "wall": time.perf_counter() - t0,
            }
            history.append(record)
            if sink:
                sink.write(json.dumps(record) + "\n")
            if log and (it % train_config.log_every == 0 or it == total - 1):
                log(
                    f"stage2 iter {it}/{total} zval {record['zval']:.4f} "
                    f"kl {record['kl']:.4f}"
                )
            it += 1
    finally:
        if sink:
            sink.close()

    ncm.eval()
    return Stage2Result(ncm=ncm, history=history, skipped=skipped)
