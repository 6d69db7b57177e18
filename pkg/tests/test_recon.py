from types import SimpleNamespace

import numpy as np
import pytest

import oracles
from helpers import gradient_check
from irgs import recon
from irgs.imgcore import ShapeError


def _slot(m, r, latent=None):
    return SimpleNamespace(mask=m, recon=r, latent=latent)


def test_param_layout():
    ae = recon.init_model(4, 5, hidden=6, latent=2, mode="autoencoder")
    assert list(ae.params) == recon.param_names("autoencoder")
    assert ae.params["W_enc"].shape == (6, 80)
    assert ae.params["W_out"].shape == (60, 6)
    vae = recon.init_model(4, 5, hidden=6, latent=2, mode="vae")
    assert "W_lv" in vae.params and "W_z" not in vae.params
    with pytest.raises(ValueError):
        recon.init_model(4, 4, mode="gan")


def test_init_is_seeded():
    a = recon.init_model(4, 4, seed=3)
    b = recon.init_model(4, 4, seed=3)
    c = recon.init_model(4, 4, seed=4)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    assert not np.array_equal(a.params["W_enc"], c.params["W_enc"])


def test_reconstruction_range_and_shape():
    m = recon.init_model(5, 7, hidden=8, latent=3)
    x = np.random.default_rng(0).uniform(size=(5, 7, 3))
    r, stats = recon.reconstruct(m, x, np.ones((5, 7)))
    assert r.shape == (5, 7, 3)
    assert r.min() >= 0 and r.max() <= 1
    assert stats.mean.shape == (3,) and stats.logvar.shape == (3,)


def test_reconstruct_shape_mismatch():
    m = recon.init_model(4, 4, hidden=3, latent=2)
    with pytest.raises(ShapeError):
        recon.reconstruct(m, np.zeros((5, 4, 3)), np.ones((5, 4)))
    with pytest.raises(ShapeError):
        recon.reconstruct(m, np.zeros((4, 4, 3)), np.ones((4, 5)))


def test_vae_sampling_is_seeded_and_mean_is_deterministic():
    m = recon.init_model(4, 4, hidden=5, latent=3, mode="vae")
    x = np.random.default_rng(1).uniform(size=(4, 4, 3))
    s = np.ones((4, 4))
    a, _ = recon.reconstruct(m, x, s, seed=5)
    b, _ = recon.reconstruct(m, x, s, seed=5)
    c, _ = recon.reconstruct(m, x, s, seed=6)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    m1, _ = recon.reconstruct(m, x, s)
    m2, _ = recon.reconstruct(m, x, s)
    np.testing.assert_array_equal(m1, m2)


def test_kl_closed_form_values():
    assert recon.kl_term(recon.LatentStats(np.zeros(4), np.zeros(4))) == 0.0
    assert recon.kl_term(recon.LatentStats(np.ones(1), np.zeros(1))) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        recon.kl_term(recon.LatentStats(np.zeros(2)))


@pytest.mark.parametrize("mu,lv", [(0.0, 0.0), (0.7, -1.3), (-2.0, 0.8), (1.5, -4.0)])
def test_kl_matches_quadrature(mu, lv):
    got = recon.kl_term(recon.LatentStats(np.array([mu]), np.array([lv])))
    assert got == pytest.approx(oracles.kl_quadrature(mu, lv), abs=1e-6)


@pytest.mark.parametrize("mask_weighted", [False, True])
def test_loss_matches_scalar_sum(mask_weighted):
    rng = np.random.default_rng(2)
    x = rng.uniform(size=(4, 4, 3))
    masks = [rng.uniform(size=(4, 4)) for _ in range(2)]
    recons = [rng.uniform(size=(4, 4, 3)) for _ in range(2)]
    stats = [recon.LatentStats(rng.normal(size=3), rng.normal(size=3)) for _ in range(2)]
    w = recon.LossWeights(beta=0.3, gamma=0.4, zeta=0.1, mask_weighted_recon=mask_weighted)
    total, terms = recon.loss([_slot(m, r, st) for m, r, st in zip(masks, recons, stats)], x, w)
    expect = oracles.loss(masks, recons, x, 0.3, 0.4, 0.1, mask_weighted,
                          [recon.kl_term(st) for st in stats])
    assert total == pytest.approx(expect, abs=1e-9)
    assert total == pytest.approx(sum(terms.values()))


def test_loss_is_zero_for_perfect_fit():
    x = np.random.default_rng(3).uniform(size=(3, 3, 3))
    w = recon.LossWeights(beta=0.5, gamma=0.0, mask_weighted_recon=False)
    total, _ = recon.loss([_slot(np.ones((3, 3)), x)], x, w)
    assert total == 0.0


def test_autoencoder_drops_gamma():
    w = recon.LossWeights(gamma=0.5)
    assert w.for_mode("autoencoder").gamma == 0.0
    assert w.for_mode("vae").gamma == 0.5


def test_loss_weights_validation():
    with pytest.raises(ValueError):
        recon.LossWeights(beta=-1.0)
    with pytest.raises(ValueError):
        recon.LossWeights(zeta=1.5)


@pytest.mark.parametrize("mode", recon.MODES)
@pytest.mark.parametrize("gq", [False, True])
def test_gradient_matches_finite_differences(mode, gq):
    assert gradient_check(mode, gq, seed=1) <= 1e-4


@pytest.mark.parametrize("mw", [False, True])
def test_gradient_without_background_adjustment(mw):
    assert gradient_check("vae", True, seed=2, mask_weighted=mw, adjust=False) <= 1e-4


def test_gradient_through_q_changes_gradient():
    from helpers import small_config
    from irgs import pipeline
    rng = np.random.default_rng(4)
    x = rng.uniform(size=(6, 6, 3))
    model = recon.init_model(6, 6, 4, 3, "autoencoder", seed=4)
    cfg = small_config()
    d = pipeline.adjust_background(pipeline.decompose(model, x, cfg, seed=0))
    on = recon.backward(model, x, d, cfg.loss)
    off = recon.backward(model, x, d, recon.LossWeights(0.3, 0.7, 0.2, False, True))
    assert not np.allclose(on["W_out"], off["W_out"])


def test_zero_loss_configuration_gives_zero_gradients():
    from helpers import small_config
    from irgs import pipeline
    model = recon.init_model(6, 6, 4, 3, "autoencoder", seed=0)
    x = np.random.default_rng(0).uniform(size=(6, 6, 3))
    cfg = small_config()
    d = pipeline.decompose(model, x, cfg)
    zero = [SimpleNamespace(**{**vars(sl), "mask": np.zeros((6, 6))}) for sl in d.slots]
    d0 = type(d)(slots=zero, final_remaining=d.final_remaining, sigma1=d.sigma1)
    g = recon.backward(model, x, d0, recon.LossWeights(beta=0.0, gamma=0.0,
                                                       grad_through_q=False))
    assert all(np.all(v == 0) for v in g.values())


def test_sgd_step():
    m = recon.init_model(3, 3, 2, 1, "autoencoder")
    g = {k: np.ones_like(v) for k, v in m.params.items()}
    same = recon.sgd_step(m, g, 0.0)
    assert all(np.array_equal(same.params[k], m.params[k]) for k in m.params)
    moved = recon.sgd_step(m, g, 0.1)
    np.testing.assert_allclose(moved.params["b_out"], m.params["b_out"] - 0.1)
    g["b_z"] = np.full_like(g["b_z"], np.nan)
    with pytest.raises(FloatingPointError):
        recon.sgd_step(m, g, 0.1)


@pytest.mark.parametrize("opt", ["sgd", "adam"])
def test_repeated_steps_on_one_image_reduce_loss(opt):
    from helpers import small_config
    from irgs import pipeline
    x = np.random.default_rng(5).uniform(size=(6, 6, 3))
    model = recon.init_model(6, 6, 8, 3, "autoencoder", seed=5)
    cfg = small_config(gamma=0.0)
    optimizer = recon.make_optimizer(opt, 0.05 if opt == "sgd" else 0.01)
    losses = []
    for step in range(50):
        model, value = pipeline.train_step(model, x, cfg, step, optimizer)
        losses.append(value)
    assert losses[-1] < losses[0]


def test_adam_zero_lr_is_identity():
    m = recon.init_model(3, 3, 2, 1, "vae")
    g = {k: np.ones_like(v) for k, v in m.params.items()}
    out = recon.Adam(0.0).step(m, g)
    assert all(np.array_equal(out.params[k], m.params[k]) for k in m.params)
    with pytest.raises(ValueError):
        recon.make_optimizer("rmsprop", 0.1)
