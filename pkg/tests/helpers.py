"""Shared fixtures-as-functions for the recon, pipeline and acceptance tests."""
from types import SimpleNamespace

import numpy as np

import oracles
from irgs import pipeline, recon
from irgs.local_gmm import GmmParams
from irgs.localization import ButterworthParams
from irgs.quality import QualityParams, compute_quality


def small_config(K=2, sigma1=0.5, grad_through_q=True, mask_weighted=True,
                 beta=0.3, gamma=0.7, zeta=0.2, ablation="full"):
    return pipeline.PipelineConfig(
        K=K,
        quality=QualityParams(sigma1=sigma1, kernel_size=3),
        butter=ButterworthParams(n=2, f=2.0),
        gmm=GmmParams(em_iters=5),
        loss=recon.LossWeights(beta=beta, gamma=gamma, zeta=zeta,
                               grad_through_q=grad_through_q,
                               mask_weighted_recon=mask_weighted),
        ablation=ablation,
    )


def objective_with_frozen_context(model, x, decomp, cfg):
    """Loss as a function of the parameters, holding the no-gradient quantities fixed.

    With gradient through Q, only the first (reconstruction) term sees masks
    rebuilt from a live Q; the prior term keeps the decomposition's masks.
    """
    weights = cfg.loss.for_mode(model.mode)
    q_live = weights.grad_through_q and decomp.ablation != "l_only"
    live, frozen = [], []
    for sl in decomp.slots:
        c = recon.forward(model, x, sl.remaining_before, sl.noise)
        m = sl.mask
        if q_live:
            q = compute_quality(x, c["x_re"], sl.remaining_before, cfg.quality)
            m = sl.remaining_before * q * sl.location
        live.append(SimpleNamespace(mask=m, recon=c["x_re"], latent=None))
        frozen.append(SimpleNamespace(mask=sl.mask, recon=c["x_re"], latent=c["stats"]))
    if decomp.background_adjusted:
        if q_live:
            live[0].mask = np.clip(1.0 - sum(sl.mask for sl in live[1:]), 0.0, 1.0)
        else:
            live[0].mask = decomp.slots[0].mask
    first = recon.LossWeights(0.0, 0.0, mask_weighted_recon=weights.mask_weighted_recon)
    total = recon.loss(live, x, first)[0]
    for sl in frozen:
        total += weights.beta * np.sum((1.0 - sl.mask)[..., None] * (sl.recon - weights.zeta) ** 2)
        if weights.gamma and sl.latent.logvar is not None:
            total += weights.gamma * recon.kl_term(sl.latent)
    return total


def gradient_check(mode, grad_through_q, seed=0, size=6, hidden=4, latent=3,
                   mask_weighted=True, adjust=True):
    """Return the worst relative error between backward and central differences."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(size, size, 3))
    model = recon.init_model(size, size, hidden, latent, mode, seed=seed)
    cfg = small_config(grad_through_q=grad_through_q, mask_weighted=mask_weighted)
    d = pipeline.decompose(model, x, cfg, seed=seed, sample=True)
    if adjust:
        d = pipeline.adjust_background(d)
    analytic = recon.backward(model, x, d, cfg.loss)
    numeric = oracles.central_difference(
        lambda: objective_with_frozen_context(model, x, d, cfg), model.params, 1e-5)
    return max(oracles.relative_error(analytic[k], numeric[k]) for k in model.params)
