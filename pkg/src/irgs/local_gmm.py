"""Weighted two-component GMM inside the Butterworth window.

Features are ``(r, g, b, row_norm, col_norm)``. Pixels whose hard weight is
zero take no part in either EM pass: their responsibilities stay at 0.5 and
the returned location mask is 0 there.

Component 2 (index 1) is the object. With ``identity="center"`` the two
components are swapped after EM whenever the center pixel belongs to
component 1, so the object is always the cluster holding the localized
center; ``identity="literal"`` keeps the raw component order.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np

from irgs import kernels
from irgs.imgcore import build_features
from irgs.localization import butterworth_mask, hard_weights

log = logging.getLogger(__name__)

N_COMPONENTS = 2
N_FEATURES = 5


class DegenerateWindowError(RuntimeError):
    """The weighted window cannot support an EM update."""


@dataclass(frozen=True)
class GmmParams:
    em_iters: int = 20
    variance_floor: float = 1e-4
    seed: int = 0
    identity: str = "center"

    def __post_init__(self):
        if self.em_iters < 1:
            raise ValueError("em_iters must be >= 1")
        if not self.variance_floor > 0:
            raise ValueError("variance_floor must be positive")
        if self.identity not in ("center", "literal"):
            raise ValueError("identity must be 'center' or 'literal'")


@dataclass(frozen=True)
class GmmState:
    means: np.ndarray          # (2, 5)
    variances: np.ndarray      # (2, 5)
    responsibilities: np.ndarray  # (H, W, 2)


def init_gmm(features, seed):
    features = np.asarray(features)
    h, w = features.shape[:2]
    rng = np.random.default_rng(seed)
    means = np.zeros((N_COMPONENTS, N_FEATURES))
    means[1] = rng.uniform(0.0, 1.0, size=N_FEATURES)
    return GmmState(
        means=means,
        variances=np.ones((N_COMPONENTS, N_FEATURES)),
        responsibilities=np.full((h, w, N_COMPONENTS), 0.5),
    )


def _active(features, weights):
    idx = np.flatnonzero(np.asarray(weights).ravel() > 0.5)
    if idx.size == 0:
        raise DegenerateWindowError("all weights are zero")
    feats = np.ascontiguousarray(features.reshape(-1, features.shape[-1])[idx])
    return idx, feats


def _scatter(resp_active, idx, shape):
    full = np.full((shape[0] * shape[1], N_COMPONENTS), 0.5)
    full[idx] = resp_active
    return full.reshape(shape[0], shape[1], N_COMPONENTS)


def e_step(state, features, weights):
    """Recompute responsibilities of active pixels from the current parameters."""
    idx, feats = _active(features, weights)
    resp, _ = kernels.gmm_e_step(feats, state.means, state.variances)
    return replace(state, responsibilities=_scatter(resp, idx, features.shape))


def em_step(state, features, weights, variance_floor=1e-4):
    """One weighted M-step followed by an E-step."""
    features = np.asarray(features, dtype=np.float64)
    idx, feats = _active(features, weights)
    z = np.ascontiguousarray(state.responsibilities.reshape(-1, N_COMPONENTS)[idx])
    mass = z.sum(axis=0)
    if np.any(mass <= 1e-300):
        raise DegenerateWindowError(f"component mass vanished: {mass}")
    means, variances, _ = kernels.gmm_m_step(feats, z, variance_floor)
    resp, _ = kernels.gmm_e_step(feats, means, variances)
    return GmmState(means, variances, _scatter(resp, idx, features.shape))


def log_likelihood(state, features, weights):
    """Equal-prior mixture log-likelihood summed over active pixels."""
    _, feats = _active(np.asarray(features, dtype=np.float64), weights)
    return kernels.gmm_e_step(feats, state.means, state.variances)[1]


def swap_components(state):
    return GmmState(state.means[::-1].copy(), state.variances[::-1].copy(),
                    state.responsibilities[..., ::-1].copy())


def fit_lgmm(x, center, butter, gmm):
    """Run the local GMM; return ``(location_mask, final_state, weights)``.

    The initial means only matter through a first E-step, since the uniform
    0.5 responsibilities would otherwise collapse both components onto the
    same weighted mean at the first M-step.
    """
    feats = build_features(x)
    h, w = feats.shape[:2]
    weights = hard_weights(butterworth_mask(h, w, center, butter))
    state = init_gmm(feats, gmm.seed)
    idx, active = _active(feats, weights)
    z, _ = kernels.gmm_e_step(active, state.means, state.variances)
    # same iterations as repeated em_step calls, in one compiled loop
    means, variances, z, ok = kernels.gmm_em(active, z, gmm.em_iters, gmm.variance_floor)
    if not ok:
        raise DegenerateWindowError("component mass vanished during EM")
    state = GmmState(means, variances, _scatter(z, idx, feats.shape))
    if gmm.identity == "center" and state.responsibilities[center[0], center[1], 1] < 0.5:
        state = swap_components(state)
    loc = np.where(weights > 0.5, state.responsibilities[..., 1], 0.0)
    return loc, state, weights


def run_lgmm(x, center, butter, gmm):
    return fit_lgmm(x, center, butter, gmm)[0]
