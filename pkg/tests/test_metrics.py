import numpy as np
import pytest

import oracles
from irgs import metrics


def test_identical_labelings():
    a = np.array([[0, 0, 1], [1, 2, 2]])
    assert metrics.ari(a, a, foreground_only=False) == 1.0
    assert metrics.ami(a, a) == pytest.approx(1.0)


def test_relabeling_invariance():
    truth = np.array([0, 0, 1, 1, 2, 2, 2])
    pred = np.array([5, 5, 9, 9, 1, 1, 1])
    assert metrics.ari(pred, truth, foreground_only=False) == 1.0
    assert metrics.ami(pred, truth) == pytest.approx(1.0)


def test_constant_prediction_on_balanced_truth():
    truth = np.array([1, 1, 2, 2, 3, 3])
    assert metrics.ari(np.zeros(6), truth, foreground_only=False) == pytest.approx(0.0)
    assert metrics.ami(np.zeros(6), truth) == pytest.approx(0.0, abs=1e-12)


def test_known_value():
    # the classic example: ARI of [0,0,1,1] vs [0,0,1,2] is 4/7
    assert metrics.ari([0, 0, 1, 1], [0, 0, 1, 2], foreground_only=False) == pytest.approx(4 / 7)


def test_foreground_only_ignores_background():
    truth = np.array([0, 0, 0, 1, 1, 2, 2])
    pred = np.array([1, 2, 3, 4, 4, 5, 5])
    assert metrics.ari(pred, truth) == 1.0
    assert metrics.ari(pred, truth, foreground_only=False) < 1.0


def test_empty_selection():
    with pytest.raises(metrics.EmptySelectionError):
        metrics.ari(np.zeros(4), np.zeros(4))
    with pytest.raises(metrics.EmptySelectionError):
        metrics.ami([], [])


def test_size_mismatch():
    with pytest.raises(ValueError):
        metrics.ari(np.zeros(3), np.zeros(4), foreground_only=False)


def test_contingency_counts():
    t = metrics.contingency([0, 0, 1, 1, 1], [2, 3, 3, 3, 2])
    np.testing.assert_array_equal(t.counts, [[1, 1], [1, 2]])
    assert t.total == 5
    np.testing.assert_array_equal(t.rows, [2, 3])


@pytest.mark.parametrize("max_n", [5])
def test_matches_oracles_exhaustively_small(max_n):
    for pred, truth in oracles.exhaustive_pairs(max_n, 3):
        assert metrics.ari(pred, truth, foreground_only=False) == pytest.approx(
            oracles.rand_index_ari(pred, truth), abs=1e-9)
        assert metrics.ami(pred, truth) == pytest.approx(oracles.ami(pred, truth), abs=1e-9)


def test_expected_mi_matches_exact_binomial_sum():
    rng = np.random.default_rng(0)
    for _ in range(20):
        pred = rng.integers(0, 4, size=30)
        truth = rng.integers(0, 3, size=30)
        t = metrics.contingency(pred, truth)
        assert metrics.expected_mutual_info(t) == pytest.approx(
            oracles.expected_mi(list(pred), list(truth)), abs=1e-12)


def test_ami_is_chance_adjusted_on_random_labelings():
    rng = np.random.default_rng(1)
    vals = [metrics.ami(rng.integers(0, 3, 200), rng.integers(0, 3, 200)) for _ in range(50)]
    assert abs(np.mean(vals)) < 0.01


def test_permutation_invariance():
    rng = np.random.default_rng(2)
    pred = rng.integers(0, 4, size=40)
    truth = rng.integers(0, 3, size=40)
    base_ari = metrics.ari(pred, truth, foreground_only=False)
    base_ami = metrics.ami(pred, truth)
    for _ in range(20):
        perm = rng.permutation(4)
        assert metrics.ari(perm[pred], truth, foreground_only=False) == pytest.approx(base_ari, abs=1e-12)
        assert metrics.ami(perm[pred], truth) == pytest.approx(base_ami, abs=1e-12)
