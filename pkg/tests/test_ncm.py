import pytest
import torch

from mocha.config import AblationFlags, ModelConfig
from mocha.models import NcmState, NeuralContextMatcher


@pytest.fixture(scope="module")
def cfg():
    return ModelConfig.tiny()


def ctx(cfg, seed=0, b=None):
    g = torch.Generator().manual_seed(seed)
    shape = (cfg.n_patches, cfg.ctx_dim) if b is None else (b, cfg.n_patches, cfg.ctx_dim)
    return torch.randn(*shape, generator=g)


def test_prior_parameter_shapes(cfg):
    ncm = NeuralContextMatcher(cfg)
    mu, sigma = ncm.prior_params(ctx(cfg, b=3), ctx(cfg, seed=1, b=3))
    assert mu.shape == (3, cfg.C)
    assert sigma.shape == (3, cfg.C)
    assert (sigma >= 1e-4).all()


def test_posterior_parameter_shapes(cfg):
    ncm = NeuralContextMatcher(cfg)
    mu, sigma = ncm.posterior_params(
        ctx(cfg, b=2), ctx(cfg, seed=1, b=2), ctx(cfg, seed=2, b=2)
    )
    assert mu.shape == (2, cfg.C)
    assert (sigma > 0).all()


def test_decode_shape(cfg):
    ncm = NeuralContextMatcher(cfg)
    s = torch.randn(2, cfg.C)
    out = ncm.decode(s, ctx(cfg, b=2), ctx(cfg, seed=3, b=2))
    assert out.shape == (2, cfg.n_patches, cfg.C)


def test_mean_mode_step_is_deterministic(cfg):
    ncm = NeuralContextMatcher(cfg)
    ncm.eval()
    state = NcmState.initial(cfg, character_id="c")
    z1, s1 = ncm.step(state, ctx(cfg, seed=4), mode="mean")
    z2, s2 = ncm.step(state, ctx(cfg, seed=4), mode="mean")
    assert torch.equal(z1, z2)
    assert torch.equal(s1.prev, s2.prev)
    assert s1.step_index == 1


def test_stochastic_step_reproducible_with_generator(cfg):
    ncm = NeuralContextMatcher(cfg)
    ncm.eval()
    state = NcmState.initial(cfg, character_id="c")
    g1 = torch.Generator().manual_seed(9)
    g2 = torch.Generator().manual_seed(9)
    z1, _ = ncm.step(state, ctx(cfg, seed=5), mode="stochastic", generator=g1)
    z2, _ = ncm.step(state, ctx(cfg, seed=5), mode="stochastic", generator=g2)
    z3, _ = ncm.step(state, ctx(cfg, seed=5), mode="stochastic",
                     generator=torch.Generator().manual_seed(10))
    assert torch.equal(z1, z2)
    assert not torch.equal(z1, z3)


def test_state_advances_and_detaches(cfg):
    ncm = NeuralContextMatcher(cfg)
    state = NcmState.initial(cfg, character_id="c")
    z, nxt = ncm.step(state, ctx(cfg, seed=6), mode="mean")
    assert torch.equal(nxt.prev, z.detach())
    assert not nxt.prev.requires_grad
    assert nxt.character_id == "c"


def test_disable_prior_net_gives_standard_normal(cfg):
    ncm = NeuralContextMatcher(cfg, flags=AblationFlags(disable_prior_net=True))
    mu, sigma = ncm.prior_params(ctx(cfg, b=2), ctx(cfg, seed=7, b=2))
    assert torch.equal(mu, torch.zeros(2, cfg.C))
    assert torch.equal(sigma, torch.ones(2, cfg.C))


def test_disable_autoregression_ignores_history(cfg):
    flags = AblationFlags(disable_autoregression=True)
    ncm = NeuralContextMatcher(cfg, flags=flags)
    ncm.eval()
    c = ctx(cfg, seed=8)
    s = torch.randn(cfg.C)
    prev_a = torch.randn(cfg.n_patches, cfg.C)
    prev_b = torch.randn(cfg.n_patches, cfg.C) * 5
    out_a = ncm.decode(s, prev_a, c)
    out_b = ncm.decode(s, prev_b, c)
    assert torch.equal(out_a, out_b)

    live = NeuralContextMatcher(cfg)
    live.load_state_dict(ncm.state_dict())
    live.eval()
    assert not torch.equal(live.decode(s, prev_a, c), live.decode(s, prev_b, c))


def test_sample_modes(cfg):
    mu = torch.zeros(3, cfg.C)
    sigma = torch.ones(3, cfg.C)
    assert torch.equal(NeuralContextMatcher.sample(mu, sigma, mode="mean"), mu)
    g = torch.Generator().manual_seed(0)
    s = NeuralContextMatcher.sample(mu, sigma, mode="stochastic", generator=g)
    assert s.shape == mu.shape
    assert not torch.equal(s, mu)
    with pytest.raises(ValueError):
        NeuralContextMatcher.sample(mu, sigma, mode="nope")


def test_unbatched_step_matches_batched(cfg):
    ncm = NeuralContextMatcher(cfg)
    ncm.eval()
    c = ctx(cfg, seed=11)
    state = NcmState.initial(cfg, character_id="c")
    z_flat, _ = ncm.step(state, c, mode="mean")
    z_batch, _ = ncm.step(state.batched(1), c.unsqueeze(0), mode="mean")
    assert z_flat.shape == (cfg.n_patches, cfg.C)
    assert torch.allclose(z_flat, z_batch[0], atol=1e-6)


def test_sampling_is_reparameterized(cfg):
    """With the noise fixed, d sample / d mu is exactly 1 per coordinate and
    d sample / d sigma equals that noise, so gradients flow to both."""
    mu = torch.zeros(2, cfg.C, dtype=torch.float64, requires_grad=True)
    sigma = torch.full((2, cfg.C), 0.7, dtype=torch.float64, requires_grad=True)
    g = torch.Generator().manual_seed(5)
    s = NeuralContextMatcher.sample(mu, sigma, mode="stochastic", generator=g)
    s.sum().backward()
    assert torch.equal(mu.grad, torch.ones_like(mu))
    g2 = torch.Generator().manual_seed(5)
    eps = torch.randn(mu.shape, generator=g2, dtype=mu.dtype)
    assert torch.allclose(sigma.grad, eps)
