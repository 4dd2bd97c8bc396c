import pytest
import torch

from mocha.config import ModelConfig
from mocha.models import Characterizer, ContextMap, MotionEncoder
from mocha.models.characterizer import AdaIN, DecoderBlock, Expand, adain_transform
from mocha.models.context import instance_norm_patches, params_fingerprint
from mocha.models.layers import CrossAttention
from mocha.toydata import base_skeleton


@pytest.fixture(scope="module")
def cfg():
    return ModelConfig.tiny()


def patches(cfg, b=2, seed=0):
    g = torch.Generator().manual_seed(seed)
    return torch.randn(b, cfg.n_patches, cfg.C, generator=g)


class TestContextMap:
    def test_output_has_unit_patch_statistics(self, cfg):
        mapper = ContextMap(cfg)
        out = mapper(patches(cfg, seed=1))
        mean = out.mean(dim=-2)
        std = out.std(dim=-2, unbiased=False)
        assert torch.allclose(mean, torch.zeros_like(mean), atol=1e-5)
        assert torch.allclose(std, torch.ones_like(std), atol=1e-4)

    def test_normalization_cancels_channel_affine_shifts(self, cfg):
        m = patches(cfg, seed=2)
        scale = torch.rand(cfg.C) * 2 + 0.5
        shift = torch.randn(cfg.C)
        a = instance_norm_patches(m)
        b = instance_norm_patches(m * scale + shift)
        assert torch.allclose(a, b, atol=1e-5)

    def test_deterministic(self, cfg):
        mapper = ContextMap(cfg)
        m = patches(cfg, seed=3)
        assert torch.equal(mapper(m), mapper(m))

    def test_fingerprint_tracks_parameters(self, cfg):
        a = ContextMap(cfg)
        b = ContextMap(cfg)
        b.load_state_dict(a.state_dict())
        assert params_fingerprint(a) == params_fingerprint(b)
        assert len(params_fingerprint(a)) == 16
        with torch.no_grad():
            b.mlp[0].weight += 1e-3
        assert params_fingerprint(a) != params_fingerprint(b)


class TestAdaIN:
    def test_forced_statistics(self, cfg):
        z = patches(cfg, seed=4)
        gamma = torch.full((2, cfg.C), 2.0)
        beta = torch.full((2, cfg.C), 3.0)
        out = adain_transform(z, gamma, beta)
        assert torch.allclose(out.mean(dim=-2), beta, atol=1e-5)
        assert torch.allclose(out.std(dim=-2, unbiased=False), gamma.abs(), atol=1e-4)

    def test_fresh_module_normalizes(self, cfg):
        ada = AdaIN(cfg)
        z = patches(cfg, seed=5)
        out = ada(z, patches(cfg, seed=6))
        mean = out.mean(dim=-2)
        std = out.std(dim=-2, unbiased=False)
        assert torch.allclose(mean, torch.zeros_like(mean), atol=1e-5)
        assert torch.allclose(std, torch.ones_like(std), atol=1e-4)

    def test_affine_bias_survives_zeroing_pass(self, cfg):
        from mocha.models.layers import zero_biases

        ada = AdaIN(cfg)
        zero_biases(ada)
        assert torch.equal(ada.affine.bias[: cfg.C], torch.ones(cfg.C))
        assert torch.equal(ada.affine.bias[cfg.C :], torch.zeros(cfg.C))


class TestDecoderBlock:
    def test_reduces_to_adain_when_projections_zeroed(self, cfg):
        block = DecoderBlock(cfg)
        mapper = ContextMap(cfg)
        with torch.no_grad():
            block.mca.proj.weight.zero_()
            block.mca.proj.bias.zero_()
            block.ffn.net[-1].weight.zero_()
            block.ffn.net[-1].bias.zero_()
        z_src = patches(cfg, seed=7)
        z_cha = patches(cfg, seed=8)
        out = block(z_src, z_cha, mapper)
        assert torch.equal(out, block.adain(z_src, z_cha))

    def test_disable_adain_passes_source_through(self, cfg):
        block = DecoderBlock(cfg)
        mapper = ContextMap(cfg)
        with torch.no_grad():
            block.mca.proj.weight.zero_()
            block.mca.proj.bias.zero_()
            block.ffn.net[-1].weight.zero_()
            block.ffn.net[-1].bias.zero_()
        z_src = patches(cfg, seed=9)
        z_cha = patches(cfg, seed=10)
        assert torch.equal(block(z_src, z_cha, mapper, disable_adain=True), z_src)

    def test_cross_attention_concentrates_on_dominant_key(self, cfg):
        attn = CrossAttention(cfg.C, cfg.n_heads)
        eye = torch.eye(cfg.C)
        with torch.no_grad():
            attn.q_proj.weight.copy_(eye)
            attn.k_proj.weight.copy_(eye)
            attn.v_proj.weight.copy_(eye)
            attn.proj.weight.copy_(eye)
            attn.proj.bias.zero_()
        n = 5
        direction = torch.zeros(cfg.C)
        direction[:: cfg.d_head] = 40.0
        keys = torch.randn(1, n, cfg.C) * 0.01
        keys[0, 2] = direction
        values = torch.randn(1, n, cfg.C)
        query = direction.view(1, 1, cfg.C)
        out, w = attn(query, keys, values, return_weights=True)
        assert w[0, :, 0, 2].min() > 0.999
        assert torch.allclose(out[0, 0], values[0, 2], atol=1e-2)


class TestExpand:
    def test_output_shape(self, cfg):
        sk = base_skeleton()
        expand = Expand(cfg, sk)
        out = expand(patches(cfg, seed=11))
        assert out.shape == (2, cfg.T, len(sk.joint_names), 15)

    def test_zero_features_give_zero_pose_with_zeroed_head_bias(self, cfg):
        sk = base_skeleton()
        expand = Expand(cfg, sk)
        with torch.no_grad():
            expand.head.bias.zero_()
        out = expand(torch.zeros(1, cfg.n_patches, cfg.C))
        assert torch.equal(out, torch.zeros_like(out))

    def test_fresh_module_emits_identity_rotations_on_zero_features(self, cfg):
        sk = base_skeleton()
        expand = Expand(cfg, sk)
        out = expand(torch.zeros(1, cfg.n_patches, cfg.C))
        identity6 = torch.tensor([1.0, 0, 0, 0, 1.0, 0])
        assert torch.equal(out[..., 3:9], identity6.expand_as(out[..., 3:9]))
        assert torch.equal(out[..., :3], torch.zeros_like(out[..., :3]))
        assert torch.equal(out[..., 9:], torch.zeros_like(out[..., 9:]))


class TestCharacterizer:
    def test_forward_shape(self, cfg):
        sk = base_skeleton()
        ch = Characterizer(cfg, sk)
        mapper = ContextMap(cfg)
        out = ch(patches(cfg, seed=12), patches(cfg, seed=13), mapper)
        assert out.shape == (2, cfg.T, len(sk.joint_names), 15)

    def test_adain_flag_changes_output(self, cfg):
        sk = base_skeleton()
        ch = Characterizer(cfg, sk)
        mapper = ContextMap(cfg)
        z_src = patches(cfg, seed=14)
        z_cha = patches(cfg, seed=15)
        on = ch(z_src, z_cha, mapper)
        off = ch(z_src, z_cha, mapper, disable_adain=True)
        assert not torch.allclose(on, off)

    def test_end_to_end_with_encoder_shapes(self, cfg):
        sk = base_skeleton()
        enc = MotionEncoder(cfg, sk)
        mapper = ContextMap(cfg)
        ch = Characterizer(cfg, sk)
        x = torch.randn(2, cfg.T, len(sk.joint_names), 15)
        z = enc(x)
        y = ch(z, z, mapper)
        assert y.shape == x.shape
