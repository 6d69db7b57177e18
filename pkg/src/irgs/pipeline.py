"""Slot-by-slot scene decomposition and training loop.

Slot 1 is the background and uses no location mask. Every later slot
reconstructs the image given the remaining mask, finds the best-reconstructed
area, clusters the pixels around it and claims ``s_prev * Q * L`` of the
remaining mask.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from irgs import recon
from irgs.imgcore import as_image
from irgs.local_gmm import DegenerateWindowError, GmmParams, fit_lgmm
from irgs.localization import ButterworthParams
from irgs.quality import QualityParams, area_quality, compute_quality, find_center

log = logging.getLogger(__name__)

ABLATIONS = ("full", "q_only", "l_only")


@dataclass(frozen=True)
class PipelineConfig:
    K: int = 3
    quality: QualityParams = field(default_factory=QualityParams)
    butter: ButterworthParams = field(default_factory=ButterworthParams)
    gmm: GmmParams = field(default_factory=GmmParams)
    loss: recon.LossWeights = field(default_factory=recon.LossWeights)
    ablation: str = "full"
    adjust_background: bool = True

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("K must be >= 2 (background plus one object slot)")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}")


@dataclass
class Slot:
    mask: np.ndarray
    recon: np.ndarray
    latent: recon.LatentStats | None
    remaining_before: np.ndarray
    quality: np.ndarray
    location: np.ndarray
    noise: np.ndarray | None = None
    center: tuple | None = None
    gmm_means: np.ndarray | None = None
    degenerate: bool = False

    def object_location(self):
        """Normalized (row, col) of the object component's mean, if any."""
        if self.gmm_means is None:
            return None
        return float(self.gmm_means[1, 3]), float(self.gmm_means[1, 4])


@dataclass
class SlotDecomposition:
    slots: list
    final_remaining: np.ndarray
    sigma1: float
    ablation: str = "full"
    background_adjusted: bool = False
    warnings: list = field(default_factory=list)

    @property
    def K(self):
        return len(self.slots)

    @property
    def masks(self):
        return np.stack([sl.mask for sl in self.slots])


def recursion_step(s_prev, q, loc):
    """``(s, m)`` with ``m = s_prev * q * loc`` and ``s = s_prev * (1 - q * loc)``."""
    claim = q * loc
    return s_prev * (1.0 - claim), s_prev * claim


def _slot_seeds(seed, gmm_seed, k):
    noise_seed, lgmm_seed = np.random.SeedSequence([seed, gmm_seed, k]).generate_state(2)
    return int(noise_seed), int(lgmm_seed)


def decompose(model, x, cfg, seed=0, sample=False,
              reconstruct_fn=None, quality_fn=None, locate_fn=None):
    """Run the K-slot decomposition of ``x``.

    ``sample`` draws VAE latents (training); otherwise the posterior mean is
    decoded. The ``*_fn`` hooks replace the corresponding stage and exist for
    testing the mask bookkeeping in isolation:

    - ``reconstruct_fn(x, s_prev, k) -> (x_re, latent_stats)``
    - ``quality_fn(x, x_re, s_prev, k) -> Q``
    - ``locate_fn(x, s_prev, q, k) -> (L, center, gmm_means)``
    """
    x = as_image(x)
    h, w, _ = x.shape
    s = np.ones((h, w))
    slots, warnings = [], []
    for k in range(cfg.K):
        noise_seed, lgmm_seed = _slot_seeds(seed, cfg.gmm.seed, k)
        noise = None
        if reconstruct_fn is not None:
            x_re, stats = reconstruct_fn(x, s, k)
        else:
            noise = recon.draw_noise(model, noise_seed) if sample else None
            cache = recon.forward(model, x, s, noise)
            x_re, stats = cache["x_re"], cache["stats"]

        if cfg.ablation == "l_only":
            q = np.ones((h, w))
        elif quality_fn is not None:
            q = quality_fn(x, x_re, s, k)
        else:
            q = compute_quality(x, x_re, s, cfg.quality)

        center = gmm_means = None
        degenerate = False
        if k == 0 or cfg.ablation == "q_only":
            loc = np.ones((h, w))
        elif locate_fn is not None:
            loc, center, gmm_means = locate_fn(x, s, q, k)
        else:
            center = find_center(area_quality(s * q, cfg.quality))
            try:
                loc, state, _ = fit_lgmm(x, center, cfg.butter,
                                         replace(cfg.gmm, seed=lgmm_seed))
                gmm_means = state.means.copy()
            except DegenerateWindowError as exc:
                msg = f"slot {k + 1}: degenerate window at {center}: {exc}"
                log.warning(msg)
                warnings.append(msg)
                loc = np.zeros((h, w))
                degenerate = True

        s_next, m = recursion_step(s, q, loc)
        slots.append(Slot(mask=m, recon=x_re, latent=stats, remaining_before=s,
                          quality=q, location=loc, noise=noise, center=center,
                          gmm_means=gmm_means, degenerate=degenerate))
        s = s_next
    return SlotDecomposition(slots=slots, final_remaining=s, sigma1=cfg.quality.sigma1,
                             ablation=cfg.ablation, warnings=warnings)


def adjust_background(d):
    """Replace the background mask by the clamped complement of the object masks."""
    objects = sum((sl.mask for sl in d.slots[1:]), np.zeros_like(d.slots[0].mask))
    bg = replace(d.slots[0], mask=np.clip(1.0 - objects, 0.0, 1.0))
    return replace(d, slots=[bg, *d.slots[1:]], background_adjusted=True)


def hard_assignment(d):
    """1-based slot label of the largest mask at each pixel; ties go to the lower slot."""
    return np.argmax(d.masks, axis=0).astype(np.int64) + 1


def segment(model, x, cfg, seed=0):
    d = decompose(model, x, cfg, seed=seed)
    return adjust_background(d) if cfg.adjust_background else d


def train_step(model, x, cfg, seed, optimizer):
    d = decompose(model, x, cfg, seed=seed, sample=True)
    if cfg.adjust_background:
        d = adjust_background(d)
    weights = cfg.loss.for_mode(model.mode)
    value, terms = recon.loss(d.slots, x, weights)
    if not np.isfinite(value):
        raise FloatingPointError(f"non-finite loss {value} (terms {terms})")
    grads = recon.backward(model, x, d, weights)
    return optimizer.step(model, grads), value


def train_epoch(model, dataset, cfg, seed=0, lr=1e-2, optimizer=None):
    """One seeded-shuffle pass of per-image updates; returns ``(model, mean_loss)``.

    ``optimizer`` defaults to plain SGD with learning rate ``lr``; pass a
    persistent :class:`recon.Adam` to carry moment estimates across epochs.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if optimizer is None:
        optimizer = recon.SGD(lr)
    order = np.random.default_rng(seed).permutation(len(dataset))
    total = 0.0
    for pos, idx in enumerate(order):
        img_seed = int(np.random.SeedSequence([seed, int(idx)]).generate_state(1)[0])
        try:
            model, value = train_step(model, dataset[idx], cfg, img_seed, optimizer)
        except FloatingPointError as exc:
            raise FloatingPointError(f"image {idx} (step {pos}): {exc}") from exc
        total += value
    return model, total / len(dataset)


def train(model, dataset, cfg, epochs, seed=0, lr=1e-2, optimizer="sgd", callback=None):
    """Run ``epochs`` epochs; returns ``(model, [mean_loss per epoch])``."""
    opt = recon.make_optimizer(optimizer, lr) if isinstance(optimizer, str) else optimizer
    history = []
    for epoch in range(epochs):
        epoch_seed = int(np.random.SeedSequence([seed, epoch]).generate_state(1)[0])
        model, mean_loss = train_epoch(model, dataset, cfg, seed=epoch_seed, optimizer=opt)
        history.append(mean_loss)
        if callback is not None:
            callback(epoch + 1, mean_loss)
    return model, history
