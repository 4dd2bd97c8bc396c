import pytest
import torch

from mocha.config import ModelConfig
from mocha.models import BodyPatchEmbed, MotionEncoder
from mocha.models.layers import SelfAttention
from mocha.skeleton import Skeleton
from mocha.toydata import base_skeleton


def branchy_skeleton(swap=False):
    """Eight joints covering all six parts, with two sibling finger stubs.

    The siblings live in the same part and share a parent, so exchanging
    them (together with their rows everywhere) is a pure relabeling.
    """
    names = [
        "pelvis",
        "head",
        "l_wrist",
        "l_finger_a",
        "l_finger_b",
        "r_wrist",
        "l_foot",
        "r_foot",
    ]
    parents = [-1, 0, 0, 2, 2, 0, 0, 0]
    offsets = torch.tensor(
        [
            [0.0, 1.0, 0.0],
            [0.0, 0.3, 0.0],
            [0.2, 0.0, 0.0],
            [0.05, -0.02, 0.0],
            [0.07, 0.02, 0.01],
            [-0.2, 0.0, 0.0],
            [0.1, -0.5, 0.0],
            [-0.1, -0.5, 0.0],
        ],
        dtype=torch.float64,
    )
    parts = [
        "spine",
        "head",
        "left_arm",
        "left_arm",
        "left_arm",
        "right_arm",
        "left_leg",
        "right_leg",
    ]
    effectors = {
        "head": 1,
        "left_hand": 3,
        "right_hand": 5,
        "left_foot": 6,
        "right_foot": 7,
    }
    order = list(range(8))
    if swap:
        order[3], order[4] = order[4], order[3]
    remap = {old: new for new, old in enumerate(order)}
    return Skeleton(
        joint_names=tuple(names[i] for i in order),
        parent_index=tuple(remap[parents[i]] if parents[i] >= 0 else -1 for i in order),
        rest_offset=offsets[order],
        bodypart_of_joint=tuple(parts[i] for i in order),
        end_effectors={k: remap[v] for k, v in effectors.items()},
    ), order


@pytest.fixture(scope="module")
def cfg():
    return ModelConfig.tiny()


def test_embed_shapes(cfg):
    sk = base_skeleton()
    embed = BodyPatchEmbed(cfg, sk)
    x = torch.randn(3, cfg.T, len(sk.joint_names), 15)
    out = embed(x)
    assert out.shape == (3, cfg.n_patches, cfg.C)
    assert cfg.n_patches == (cfg.T // 4) * 6


def test_embed_rejects_wrong_window_length(cfg):
    sk = base_skeleton()
    embed = BodyPatchEmbed(cfg, sk)
    with pytest.raises(ValueError):
        embed(torch.randn(1, cfg.T + 4, len(sk.joint_names), 15))


def test_embed_zero_input_returns_positional_table(cfg):
    sk = base_skeleton()
    embed = BodyPatchEmbed(cfg, sk)
    out = embed(torch.zeros(2, cfg.T, len(sk.joint_names), 15))
    assert torch.equal(out, embed.pos.expand(2, -1, -1))


def test_embed_invariant_to_sibling_relabeling(cfg):
    sk_a, _ = branchy_skeleton(swap=False)
    sk_b, order = branchy_skeleton(swap=True)
    torch.manual_seed(3)
    x = torch.randn(2, cfg.T, 8, 15)
    embed_a = BodyPatchEmbed(cfg, sk_a)
    embed_b = BodyPatchEmbed(cfg, sk_b)
    embed_b.load_state_dict(embed_a.state_dict())
    out_a = embed_a(x)
    out_b = embed_b(x[:, :, order, :])
    assert torch.allclose(out_a, out_b, atol=1e-6)


def test_encoder_output_shape(cfg):
    sk = base_skeleton()
    enc = MotionEncoder(cfg, sk)
    z = enc(torch.randn(2, cfg.T, len(sk.joint_names), 15))
    assert z.shape == (2, cfg.n_patches, cfg.C)


def test_encoder_with_zeroed_projections_is_identity_on_patches(cfg):
    sk = base_skeleton()
    enc = MotionEncoder(cfg, sk)
    with torch.no_grad():
        for block in enc.blocks:
            block.attn.proj.weight.zero_()
            block.attn.proj.bias.zero_()
            block.ffn.net[-1].weight.zero_()
            block.ffn.net[-1].bias.zero_()
    e = enc.embed(torch.randn(1, cfg.T, len(sk.joint_names), 15))
    z = enc.encode_patches(e)
    assert torch.equal(z, e)


def test_self_attention_rows_are_distributions(cfg):
    attn = SelfAttention(cfg.C, cfg.n_heads)
    x = torch.randn(2, 7, cfg.C)
    _, w = attn(x, return_weights=True)
    assert w.shape == (2, cfg.n_heads, 7, 7)
    assert torch.allclose(w.sum(dim=-1), torch.ones(2, cfg.n_heads, 7), atol=1e-6)
    assert (w >= 0).all()


def test_self_attention_single_token_weight_is_one(cfg):
    attn = SelfAttention(cfg.C, cfg.n_heads)
    _, w = attn(torch.randn(1, 1, cfg.C), return_weights=True)
    assert torch.allclose(w, torch.ones_like(w))


def test_encoder_batch_consistency(cfg):
    sk = base_skeleton()
    enc = MotionEncoder(cfg, sk)
    enc.eval()
    torch.manual_seed(5)
    x = torch.randn(4, cfg.T, len(sk.joint_names), 15)
    full = enc(x)
    one = enc(x[2:3])
    assert torch.allclose(full[2:3], one, atol=1e-6)
