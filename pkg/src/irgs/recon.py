"""Fully connected autoencoder / VAE with hand-written gradients.

The encoder sees the image and the remaining mask stacked as a fourth
channel, flattened::

    u  = [x.ravel(), s.ravel()] - 0.5
    h1 = tanh(W_enc u + b_enc)
    z  = W_z h1 + b_z                          (autoencoder)
    z  = mu + exp(logvar / 2) * eps            (vae; mu, logvar affine in h1)
    h2 = tanh(W_dec z + b_dec)
    x_re = clip(sigmoid(W_out h2 + b_out), 0, 1)

The training objective summed over slots ``k`` is::

    sum m_k (x_re_k - x)^2 + beta sum (1 - m_k)(x_re_k - zeta)^2 + gamma sum KL_k

with an option to replace ``x_re_k`` by ``m_k * x_re_k`` in the first term.
"""
from dataclasses import dataclass, field

import numpy as np

from irgs import kernels
from irgs.imgcore import ShapeError, as_image, as_mask

MODES = ("autoencoder", "vae")


def param_names(mode):
    if mode == "autoencoder":
        latent = ["W_z", "b_z"]
    elif mode == "vae":
        latent = ["W_mu", "b_mu", "W_lv", "b_lv"]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return ["W_enc", "b_enc", *latent, "W_dec", "b_dec", "W_out", "b_out"]


@dataclass
class ReconModel:
    height: int
    width: int
    hidden: int
    latent: int
    mode: str
    params: dict = field(repr=False)

    @property
    def n_in(self):
        return 4 * self.height * self.width

    @property
    def n_out(self):
        return 3 * self.height * self.width

    def param_shapes(self):
        H, Z = self.hidden, self.latent
        shapes = {
            "W_enc": (H, self.n_in), "b_enc": (H,),
            "W_z": (Z, H), "b_z": (Z,),
            "W_mu": (Z, H), "b_mu": (Z,),
            "W_lv": (Z, H), "b_lv": (Z,),
            "W_dec": (H, Z), "b_dec": (H,),
            "W_out": (self.n_out, H), "b_out": (self.n_out,),
        }
        return {k: shapes[k] for k in param_names(self.mode)}

    def validate(self):
        shapes = self.param_shapes()
        if list(self.params) != list(shapes):
            raise ValueError(f"parameter names {list(self.params)} != {list(shapes)}")
        for k, shp in shapes.items():
            if self.params[k].shape != shp:
                raise ValueError(f"{k} has shape {self.params[k].shape}, expected {shp}")
            if not np.all(np.isfinite(self.params[k])):
                raise ValueError(f"{k} has non-finite values")
        return self

    def copy(self):
        return ReconModel(self.height, self.width, self.hidden, self.latent, self.mode,
                          {k: v.copy() for k, v in self.params.items()})


def init_model(height, width, hidden=64, latent=8, mode="vae", seed=0):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    rng = np.random.default_rng(seed)
    model = ReconModel(height, width, hidden, latent, mode, {})
    params = {}
    for name, shp in model.param_shapes().items():
        if name.startswith("W"):
            params[name] = rng.normal(0.0, 1.0 / np.sqrt(shp[1]), size=shp)
        else:
            params[name] = np.zeros(shp)
    if mode == "vae":
        # start with a narrow posterior
        params["b_lv"][:] = -2.0
    model.params = params
    return model


@dataclass
class LatentStats:
    mean: np.ndarray
    logvar: np.ndarray | None = None   # None for the autoencoder


@dataclass(frozen=True)
class LossWeights:
    beta: float = 0.1
    gamma: float = 0.5
    zeta: float = 0.0
    grad_through_q: bool = True
    mask_weighted_recon: bool = True

    def __post_init__(self):
        if self.beta < 0 or self.gamma < 0:
            raise ValueError("beta and gamma must be non-negative")
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError("zeta must lie in [0, 1]")

    def for_mode(self, mode):
        """Weights with gamma zeroed for the autoencoder."""
        if mode == "autoencoder" and self.gamma != 0.0:
            return LossWeights(self.beta, 0.0, self.zeta,
                               self.grad_through_q, self.mask_weighted_recon)
        return self


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def _check_inputs(model, x, s):
    x = as_image(x)
    if x.shape != (model.height, model.width, 3):
        raise ShapeError(
            f"image {x.shape} does not match model {(model.height, model.width, 3)}")
    s = as_mask(s, x.shape, "remaining mask")
    return x, s


def draw_noise(model, seed):
    """Latent noise for one slot; ``None`` for the autoencoder or a ``None`` seed."""
    if model.mode != "vae" or seed is None:
        return None
    return np.random.default_rng(seed).standard_normal(model.latent)


def forward(model, x, s, eps=None):
    """Forward pass returning the activation cache used by :func:`backward`."""
    x, s = _check_inputs(model, x, s)
    p = model.params
    u = np.concatenate([x.ravel(), s.ravel()]) - 0.5
    h1 = np.tanh(p["W_enc"] @ u + p["b_enc"])
    if model.mode == "vae":
        mu = p["W_mu"] @ h1 + p["b_mu"]
        lv = p["W_lv"] @ h1 + p["b_lv"]
        z = mu if eps is None else mu + np.exp(0.5 * lv) * eps
        stats = LatentStats(mu, lv)
    else:
        z = p["W_z"] @ h1 + p["b_z"]
        stats = LatentStats(z)
    h2 = np.tanh(p["W_dec"] @ z + p["b_dec"])
    out = np.clip(_sigmoid(p["W_out"] @ h2 + p["b_out"]), 0.0, 1.0)
    return {"u": u, "h1": h1, "z": z, "eps": eps, "h2": h2, "out": out,
            "stats": stats, "x_re": out.reshape(x.shape)}


def reconstruct(model, x, s, seed=None):
    """``(x_re, stats)``; the VAE samples with ``seed`` and uses the mean if it is None."""
    cache = forward(model, x, s, draw_noise(model, seed))
    return cache["x_re"], cache["stats"]


def kl_term(stats):
    """KL divergence of a diagonal Gaussian posterior from the standard normal."""
    if stats.logvar is None:
        raise ValueError("kl_term needs VAE statistics")
    mu, lv = stats.mean, stats.logvar
    return 0.5 * float(np.sum(mu * mu + np.exp(lv) - lv - 1.0))


def loss(slots, x, weights):
    """Objective over ``slots`` (objects with ``mask``, ``recon``, ``latent``).

    Returns ``(total, {"recon": ..., "prior": ..., "kl": ...})``.
    """
    x = np.asarray(x, dtype=np.float64)
    if len(slots) < 1:
        raise ValueError("need at least one slot")
    terms = {"recon": 0.0, "prior": 0.0, "kl": 0.0}
    for slot in slots:
        m = np.asarray(slot.mask)
        r = np.asarray(slot.recon)
        if r.shape != x.shape or m.shape != x.shape[:2]:
            raise ShapeError("slot shapes do not match the image")
        rho = m[..., None] * r if weights.mask_weighted_recon else r
        terms["recon"] += float(np.sum(m[..., None] * (rho - x) ** 2))
        terms["prior"] += weights.beta * float(
            np.sum((1.0 - m)[..., None] * (r - weights.zeta) ** 2))
        if weights.gamma != 0.0 and slot.latent is not None and slot.latent.logvar is not None:
            terms["kl"] += weights.gamma * kl_term(slot.latent)
    return terms["recon"] + terms["prior"] + terms["kl"], terms


def _mask_gradients(decomp, x, weights, recons):
    """d(recon term)/d(Q_k), or None per slot where no gradient reaches Q."""
    K = len(decomp.slots)
    masks = [sl.mask for sl in decomp.slots]
    g_m = []
    for m, r in zip(masks, recons):
        if weights.mask_weighted_recon:
            rho = m[..., None] * r
            g = np.sum((rho - x) ** 2 + 2.0 * m[..., None] * (rho - x) * r, axis=2)
        else:
            g = np.sum((r - x) ** 2, axis=2)
        g_m.append(g)
    g_q = [None] * K
    if decomp.background_adjusted:
        raw = 1.0 - sum(masks[1:]) if K > 1 else np.ones_like(masks[0])
        live = (raw > 0.0) & (raw < 1.0)
        for k in range(1, K):
            g_m[k] = g_m[k] - np.where(live, g_m[0], 0.0)
        start = 1
    else:
        start = 0
    for k in range(start, K):
        sl = decomp.slots[k]
        if sl.degenerate:
            continue
        g_q[k] = g_m[k] * sl.remaining_before * sl.location
    return g_q


def backward(model, x, decomp, weights):
    """Gradient of the objective with respect to every model parameter.

    Remaining masks, location masks, centers and the latent noise are taken
    from ``decomp`` as constants. With ``weights.grad_through_q`` the masks of
    the first term are treated as ``s_prev * Q * L`` with Q live.
    """
    x = np.asarray(x, dtype=np.float64)
    weights = weights.for_mode(model.mode)
    p = model.params
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    caches = [forward(model, x, sl.remaining_before, sl.noise) for sl in decomp.slots]
    recons = [c["x_re"] for c in caches]

    q_live = weights.grad_through_q and decomp.ablation != "l_only"
    g_q = _mask_gradients(decomp, x, weights, recons) if q_live else [None] * len(caches)

    g_out = []
    for sl, c, gq in zip(decomp.slots, caches, g_q):
        m = sl.mask[..., None]
        r = c["x_re"]
        if weights.mask_weighted_recon:
            g_r = 2.0 * m * m * (m * r - x)
        else:
            g_r = 2.0 * m * (r - x)
        g_r = g_r + weights.beta * 2.0 * (1.0 - m) * (r - weights.zeta)
        if gq is not None:
            # dQ/dr = -Q * s_prev * (r - x) / sigma1
            coef = -gq * sl.quality * sl.remaining_before / decomp.sigma1
            g_r = g_r + coef[..., None] * (r - x)
        g_out.append(g_r.ravel())
    _backprop(model, caches, np.stack(g_out), weights.gamma, grads)
    return grads


def _backprop(model, caches, g_out, gamma, grads):
    """Accumulate parameter gradients for all slots at once.

    Row ``k`` of every stacked array belongs to slot ``k``; the per-slot outer
    products collapse into one matrix product per weight.
    """
    p = model.params
    stack = lambda key: np.stack([c[key] for c in caches])  # noqa: E731
    out, h2, z, h1, u = stack("out"), stack("h2"), stack("z"), stack("h1"), stack("u")
    # clip is inactive inside (0, 1); zero subgradient where it binds
    g_a = g_out * out * (1.0 - out) * ((out > 0.0) & (out < 1.0))
    grads["W_out"] += g_a.T @ h2
    grads["b_out"] += g_a.sum(axis=0)
    g_pre2 = (g_a @ p["W_out"]) * (1.0 - h2 ** 2)
    grads["W_dec"] += g_pre2.T @ z
    grads["b_dec"] += g_pre2.sum(axis=0)
    g_z = g_pre2 @ p["W_dec"]
    if model.mode == "vae":
        mu = np.stack([c["stats"].mean for c in caches])
        lv = np.stack([c["stats"].logvar for c in caches])
        # a missing eps means the mean was decoded: no path through the noise
        eps = np.stack([np.zeros_like(c["z"]) if c["eps"] is None else c["eps"] for c in caches])
        g_mu = g_z + gamma * mu
        g_lv = gamma * 0.5 * (np.exp(lv) - 1.0) + g_z * eps * 0.5 * np.exp(0.5 * lv)
        grads["W_mu"] += g_mu.T @ h1
        grads["b_mu"] += g_mu.sum(axis=0)
        grads["W_lv"] += g_lv.T @ h1
        grads["b_lv"] += g_lv.sum(axis=0)
        g_h1 = g_mu @ p["W_mu"] + g_lv @ p["W_lv"]
    else:
        grads["W_z"] += g_z.T @ h1
        grads["b_z"] += g_z.sum(axis=0)
        g_h1 = g_z @ p["W_z"]
    g_pre1 = g_h1 * (1.0 - h1 ** 2)
    grads["W_enc"] += g_pre1.T @ u
    grads["b_enc"] += g_pre1.sum(axis=0)


def sgd_step(model, grads, lr):
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in {k}")
    new = model.copy()
    if lr != 0.0:
        for k in new.params:
            new.params[k] -= lr * grads[k]
    return new


class SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, model, grads):
        return sgd_step(model, grads, self.lr)


class Adam:
    """Adam with bias correction; state is keyed by parameter name."""

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, model, grads):
        for k, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient in {k}")
        new = model.copy()
        if self.lr == 0.0:
            return new
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            kernels.adam_update(new.params[k].reshape(-1),
                                np.ascontiguousarray(g, dtype=np.float64).reshape(-1),
                                self.m[k].reshape(-1), self.v[k].reshape(-1),
                                self.lr, self.beta1, self.beta2, self.eps, c1, c2)
        return new


def make_optimizer(name, lr):
    if name == "sgd":
        return SGD(lr)
    if name == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {name!r}")
