"""Hot numeric kernels.

Each kernel has a numba version (``*_nb``) and a numpy version (``*_np``).
The public names dispatch on :data:`irgs._accel.USE_NUMBA`; both versions
stay importable so tests and the benchmark can compare them directly.
"""
import math

import numpy as np

from irgs._accel import USE_NUMBA, njit

LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# zero-padded box window sum
# ---------------------------------------------------------------------------

def box_sum_np(plane, k):
    h, w = plane.shape
    r = k // 2
    padded = np.zeros((h + 2 * r + 1, w + 2 * r + 1), dtype=np.float64)
    padded[r + 1:r + 1 + h, r + 1:r + 1 + w] = plane
    sat = padded.cumsum(axis=0).cumsum(axis=1)
    return (sat[k:k + h, k:k + w] - sat[0:h, k:k + w]
            - sat[k:k + h, 0:w] + sat[0:h, 0:w])


@njit
def box_sum_nb(plane, k):
    h, w = plane.shape
    r = k // 2
    # separable: rows then columns
    tmp = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for dj in range(-r, r + 1):
                jj = j + dj
                if 0 <= jj < w:
                    acc += plane[i, jj]
            tmp[i, j] = acc
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for di in range(-r, r + 1):
                ii = i + di
                if 0 <= ii < h:
                    acc += tmp[ii, j]
            out[i, j] = acc
    return out


# ---------------------------------------------------------------------------
# two-component diagonal GMM passes over compacted (active) features
# ---------------------------------------------------------------------------

def gmm_e_step_np(feats, means, variances):
    """Responsibilities and equal-prior mixture log-likelihood."""
    diff = feats[:, None, :] - means[None, :, :]
    logdens = -0.5 * (np.sum(np.log(variances), axis=1)[None, :]
                      + feats.shape[1] * LOG_2PI
                      + np.sum(diff * diff / variances[None, :, :], axis=2))
    top = logdens.max(axis=1, keepdims=True)
    e = np.exp(logdens - top)
    tot = e.sum(axis=1, keepdims=True)
    resp = e / tot
    loglik = float(np.sum(top[:, 0] + np.log(tot[:, 0]) + math.log(0.5)))
    return resp, loglik


def gmm_m_step_np(feats, resp, var_floor):
    mass = resp.sum(axis=0)
    means = (resp.T @ feats) / mass[:, None]
    diff = feats[:, None, :] - means[None, :, :]
    variances = np.einsum("nc,ncd->cd", resp, diff * diff) / mass[:, None]
    return means, np.maximum(variances, var_floor), mass


@njit
def gmm_e_step_nb(feats, means, variances):
    n, d = feats.shape
    c = means.shape[0]
    resp = np.empty((n, c))
    lognorm = np.empty(c)
    for k in range(c):
        s = d * LOG_2PI
        for t in range(d):
            s += math.log(variances[k, t])
        lognorm[k] = -0.5 * s
    loglik = 0.0
    logdens = np.empty(c)
    for i in range(n):
        top = -np.inf
        for k in range(c):
            q = 0.0
            for t in range(d):
                dv = feats[i, t] - means[k, t]
                q += dv * dv / variances[k, t]
            logdens[k] = lognorm[k] - 0.5 * q
            if logdens[k] > top:
                top = logdens[k]
        tot = 0.0
        for k in range(c):
            resp[i, k] = math.exp(logdens[k] - top)
            tot += resp[i, k]
        for k in range(c):
            resp[i, k] /= tot
        loglik += top + math.log(tot) + math.log(0.5)
    return resp, loglik


@njit
def gmm_m_step_nb(feats, resp, var_floor):
    n, d = feats.shape
    c = resp.shape[1]
    mass = np.zeros(c)
    means = np.zeros((c, d))
    for i in range(n):
        for k in range(c):
            mass[k] += resp[i, k]
            for t in range(d):
                means[k, t] += resp[i, k] * feats[i, t]
    for k in range(c):
        for t in range(d):
            means[k, t] /= mass[k]
    variances = np.zeros((c, d))
    for i in range(n):
        for k in range(c):
            for t in range(d):
                dv = feats[i, t] - means[k, t]
                variances[k, t] += resp[i, k] * dv * dv
    for k in range(c):
        for t in range(d):
            v = variances[k, t] / mass[k]
            variances[k, t] = v if v > var_floor else var_floor
    return means, variances, mass


def gmm_em_np(feats, resp, iters, var_floor):
    """``iters`` rounds of M then E starting from ``resp``."""
    means = variances = None
    for _ in range(iters):
        if resp.sum(axis=0).min() <= 1e-300:
            return means, variances, resp, False
        means, variances, _ = gmm_m_step_np(feats, resp, var_floor)
        resp, _ = gmm_e_step_np(feats, means, variances)
    return means, variances, resp, True


@njit
def gmm_em_nb(feats, resp, iters, var_floor):
    means = np.zeros((resp.shape[1], feats.shape[1]))
    variances = np.ones((resp.shape[1], feats.shape[1]))
    for _ in range(iters):
        for k in range(resp.shape[1]):
            if resp[:, k].sum() <= 1e-300:
                return means, variances, resp, False
        means, variances, _ = gmm_m_step_nb(feats, resp, var_floor)
        resp, _ = gmm_e_step_nb(feats, means, variances)
    return means, variances, resp, True


# ---------------------------------------------------------------------------
# fused Adam update (in place on flat float64 arrays)
# ---------------------------------------------------------------------------

def adam_update_np(param, grad, m, v, lr, beta1, beta2, eps, c1, c2):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    param -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


@njit(fastmath=True)
def adam_update_nb(param, grad, m, v, lr, beta1, beta2, eps, c1, c2):
    step = lr / c1
    inv_c2 = 1.0 / math.sqrt(c2)
    a1, a2 = 1.0 - beta1, 1.0 - beta2
    for i in range(param.size):
        g = grad[i]
        mi = beta1 * m[i] + a1 * g
        vi = beta2 * v[i] + a2 * g * g
        m[i] = mi
        v[i] = vi
        param[i] -= step * mi / (math.sqrt(vi) * inv_c2 + eps)


if USE_NUMBA:
    box_sum = box_sum_nb
    gmm_e_step = gmm_e_step_nb
    gmm_m_step = gmm_m_step_nb
    gmm_em = gmm_em_nb
    adam_update = adam_update_nb
else:
    box_sum = box_sum_np
    gmm_e_step = gmm_e_step_np
    gmm_m_step = gmm_m_step_np
    gmm_em = gmm_em_np
    adam_update = adam_update_np
