"""Adjusted Rand index and adjusted mutual information on label planes."""
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


class EmptySelectionError(ValueError):
    """No pixels are left to score (e.g. foreground-only on an empty scene)."""


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray   # (n_pred_labels, n_true_labels)

    @property
    def rows(self):
        return self.counts.sum(axis=1)

    @property
    def cols(self):
        return self.counts.sum(axis=0)

    @property
    def total(self):
        return int(self.counts.sum())


def contingency(pred, truth, foreground_only=False):
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"label planes differ in size: {pred.size} vs {truth.size}")
    if foreground_only:
        keep = truth != 0
        pred, truth = pred[keep], truth[keep]
    if pred.size == 0:
        raise EmptySelectionError("no pixels to score")
    _, p_idx = np.unique(pred, return_inverse=True)
    _, t_idx = np.unique(truth, return_inverse=True)
    counts = np.zeros((p_idx.max() + 1, t_idx.max() + 1), dtype=np.int64)
    np.add.at(counts, (p_idx, t_idx), 1)
    return ContingencyTable(counts)


def _pairs(n):
    n = np.asarray(n, dtype=np.float64)
    return n * (n - 1.0) / 2.0


def ari(pred, truth, foreground_only=True):
    t = contingency(pred, truth, foreground_only)
    index = _pairs(t.counts).sum()
    a, b = _pairs(t.rows).sum(), _pairs(t.cols).sum()
    expected = a * b / _pairs(t.total) if t.total > 1 else 0.0
    max_index = 0.5 * (a + b)
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))


def _entropy(n, total):
    p = n[n > 0] / total
    return float(-np.sum(p * np.log(p)))


def mutual_info(t):
    n = t.counts.astype(np.float64)
    N = t.total
    nz = n > 0
    outer = np.outer(t.rows, t.cols).astype(np.float64)
    return float(np.sum(n[nz] / N * np.log(N * n[nz] / outer[nz])))


def expected_mutual_info(t):
    """Exact E[MI] under the hypergeometric (fixed-marginals) model."""
    a = t.rows.astype(np.int64)
    b = t.cols.astype(np.int64)
    N = t.total
    lg = gammaln(np.arange(N + 2, dtype=np.float64))   # lg[k] = log((k-1)!)
    lf = lambda k: lg[k + 1]  # noqa: E731  log k!
    emi = 0.0
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - N)
            hi = min(ai, bj)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1)
            term = nij / N * (np.log(N * nij) - np.log(ai * bj))
            logp = (lf(ai) + lf(bj) + lf(N - ai) + lf(N - bj) - lf(N)
                    - lf(nij) - lf(ai - nij) - lf(bj - nij) - lf(N - ai - bj + nij))
            emi += float(np.sum(term * np.exp(logp)))
    return emi


def ami(pred, truth, foreground_only=False):
    t = contingency(pred, truth, foreground_only)
    mi = mutual_info(t)
    emi = expected_mutual_info(t)
    h_mean = 0.5 * (_entropy(t.rows, t.total) + _entropy(t.cols, t.total))
    denom = h_mean - emi
    if abs(denom) < 1e-12:
        return 1.0
    return float((mi - emi) / denom)
