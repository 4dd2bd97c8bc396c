"""Training objectives.

Reconstruction compares both motion streams of a window plus their
frame-to-frame velocities; identity and cycle terms reuse it on the
characterizer's self- and round-trip outputs. The body-patch contrastive term
is an InfoNCE over same-location patches, and the diagonal-Gaussian KL
regularizes the matcher's prior. All L1 reductions are means over every
element.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from ..config import AblationFlags
from ..windows import fk_window
from .config import LossWeights


def l1(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    return (a - b).abs().mean()


def frame_velocity(w: torch.Tensor, h: float) -> torch.Tensor:
    """Backward differences along the frame axis of a (..., T, J, 15) window."""
    return (w[..., 1:, :, :] - w[..., :-1, :, :]) / h


def loss_rec(x_pred, y_pred, x_ref, y_ref, weights: LossWeights, h: float):
    w = weights
    loss = w.lambda_loc * l1(x_pred, x_ref) + w.lambda_rt * l1(y_pred, y_ref)
    loss = loss + w.lambda_lvel * l1(frame_velocity(x_pred, h), frame_velocity(x_ref, h))
    loss = loss + w.lambda_rvel * l1(frame_velocity(y_pred, h), frame_velocity(y_ref, h))
    return loss


def characterize(
    characterizer, mapper, z_content, z_style, parent_index, h,
    disable_adain: bool = False,
):
    """Decode a (content, style) feature pair to a window pair (x, y)."""
    y = characterizer(z_content, z_style, mapper, disable_adain=disable_adain)
    x = fk_window(y, parent_index, h)
    return x, y


def loss_identity(
    characterizer, mapper, z_src, src_xy, z_cha, cha_xy, parent_index,
    weights: LossWeights, h: float, disable_adain: bool = False,
):
    """Self-characterization must reproduce the inputs on both sides."""
    x_ss, y_ss = characterize(
        characterizer, mapper, z_src, z_src, parent_index, h, disable_adain
    )
    x_cc, y_cc = characterize(
        characterizer, mapper, z_cha, z_cha, parent_index, h, disable_adain
    )
    return (
        loss_rec(x_ss, y_ss, src_xy[0], src_xy[1], weights, h)
        + loss_rec(x_cc, y_cc, cha_xy[0], cha_xy[1], weights, h)
    )


def loss_cycle(
    encoder, characterizer, mapper, z_src, src_xy, z_cha, cha_xy, parent_index,
    weights: LossWeights, h: float, disable_adain: bool = False,
):
    """Round trips through the transferred motion recover both inputs.

    The transferred window is re-encoded (gradients flow through the
    encoder here), then characterized back with the source style and
    forward with the transferred style. Returns the loss and the
    re-encoded feature so callers can reuse it for the contrastive term.
    """
    y_tra = characterizer(z_src, z_cha, mapper, disable_adain=disable_adain)
    x_tra = fk_window(y_tra, parent_index, h)
    z_tra = encoder(x_tra)
    x_cs, y_cs = characterize(
        characterizer, mapper, z_tra, z_src, parent_index, h, disable_adain
    )
    x_ct, y_ct = characterize(
        characterizer, mapper, z_cha, z_tra, parent_index, h, disable_adain
    )
    loss = (
        loss_rec(x_cs, y_cs, src_xy[0], src_xy[1], weights, h)
        + loss_rec(x_ct, y_ct, cha_xy[0], cha_xy[1], weights, h)
    )
    return loss, z_tra


def loss_contrastive(f_tra, f_src, tau: float = 0.1, normalize: bool = True):
    """InfoNCE over patches: positives share the location index, negatives
    are the remaining source patches. Accepts (N, C) or (B, N, C)."""
    if f_tra.dim() == 2:
        f_tra, f_src = f_tra.unsqueeze(0), f_src.unsqueeze(0)
    if normalize:
        f_tra = F.normalize(f_tra, dim=-1)
        f_src = F.normalize(f_src, dim=-1)
    logits = torch.matmul(f_tra, f_src.transpose(-1, -2)) / tau
    B, N, _ = logits.shape
    targets = torch.arange(N, device=logits.device).repeat(B)
    return F.cross_entropy(logits.reshape(B * N, N), targets)


def kl_diag_gauss(mu_po, sigma_po, mu_pr, sigma_pr):
    """KL(N(mu_po, diag sigma_po^2) || N(mu_pr, diag sigma_pr^2)), summed over
    the feature dimension and averaged over any leading ones."""
    var_ratio = (sigma_po / sigma_pr) ** 2
    shift = ((mu_po - mu_pr) / sigma_pr) ** 2
    per_dim = 0.5 * (var_ratio + shift - 1.0 - var_ratio.log())
    kl = per_dim.sum(dim=-1)
    return kl.mean()


def stage1_losses(
    encoder, mapper, characterizer, parent_index,
    src_x, src_y, cha_x, cha_y,
    weights: LossWeights, h: float, tau: float, norm_contrastive: bool = True,
    flags: AblationFlags | None = None,
):
    """All stage-1 terms for one (source, character) batch pair."""
    flags = flags or AblationFlags()
    no_adain = flags.disable_adain
    z_src = encoder(src_x)
    z_cha = encoder(cha_x)
    l_id = loss_identity(
        characterizer, mapper, z_src, (src_x, src_y), z_cha, (cha_x, cha_y),
        parent_index, weights, h, no_adain,
    )
    l_cyc, z_tra = loss_cycle(
        encoder, characterizer, mapper, z_src, (src_x, src_y), z_cha,
        (cha_x, cha_y), parent_index, weights, h, no_adain,
    )
    if flags.disable_contrastive:
        l_ctr = l_id.new_zeros(())
    else:
        l_ctr = loss_contrastive(
            mapper(z_tra), mapper(z_src), tau=tau, normalize=norm_contrastive
        )
    total = (
        weights.lambda_id * l_id
        + weights.lambda_cyc * l_cyc
        + weights.lambda_ctr * l_ctr
    )
    return {
        "total": total,
        "identity": l_id,
        "cycle": l_cyc,
        "contrastive": l_ctr,
    }
