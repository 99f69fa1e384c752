import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import roc_auc_score

from gprec.errors import StatisticsError, UndefinedMetricError
from gprec.evaluation import auc, compare, logloss, matched_accuracy, membership_codes

from oracles import pairwise_auc, scalar_bce


def test_auc_examples():
    assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5


def test_auc_single_class():
    with pytest.raises(UndefinedMetricError):
        auc([0.1, 0.2], [1, 1])


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 300), st.integers(0, 2**32 - 1), st.booleans())
def test_auc_matches_pairwise_oracle(n, seed, coarse):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, n)
    labels[:2] = [0, 1]
    scores = rng.integers(0, 5, n) / 4 if coarse else rng.random(n)
    assert auc(scores, labels) == pairwise_auc(scores, labels)


def test_auc_agrees_with_sklearn():
    rng = np.random.default_rng(0)
    s, y = rng.random(500), rng.integers(0, 2, 500)
    assert abs(auc(s, y) - roc_auc_score(y, s)) < 1e-12


def test_logloss_examples():
    assert abs(logloss([0.5] * 4, [0, 1, 1, 0]) - math.log(2)) < 1e-15
    assert logloss([1.0, 0.0], [1, 0]) < 1e-6
    rng = np.random.default_rng(1)
    p, y = rng.random(1000), rng.integers(0, 2, 1000)
    assert abs(logloss(p, y) - scalar_bce(p, y)) < 1e-10


def test_compare_identical_runs():
    runs = [0.80, 0.81, 0.79]
    assert compare(runs, runs).p_value == 0.5


def test_compare_separated_runs():
    a = [0.9, 0.9001, 0.8999]
    b = [0.1, 0.1001, 0.0999]
    forward = compare(a, b)
    assert forward.p_value < 0.001 and forward.significant
    backward = compare(b, a)
    assert abs(forward.p_value - (1 - backward.p_value)) < 1e-12


def test_compare_zero_variance_sets():
    assert compare([0.9] * 3, [0.1] * 3).p_value == 0.0
    assert compare([0.1] * 3, [0.9] * 3).p_value == 1.0


def test_compare_logloss_direction():
    res = compare([0.50, 0.51, 0.49], [0.60, 0.61, 0.59], "logloss", higher_is_better=False)
    assert res.significant and res.mean_a < res.mean_b


def test_compare_needs_two_runs():
    with pytest.raises(StatisticsError):
        compare([0.8], [0.7, 0.6])


def test_matched_accuracy_permutation_invariant():
    truth = np.array([0, 0, 1, 1, 2, 2, 3, 3])
    assert matched_accuracy((truth + 2) % 4, truth) == 1.0
    assert matched_accuracy([0, 0, 0, 0, 1, 1, 1, 1], truth) == 0.5


def test_membership_codes():
    m = np.array([[1, 0], [0, 1], [1, 0], [1, 1]], dtype=bool)
    codes = membership_codes(m)
    assert codes[0] == codes[2] and len(set(codes.tolist())) == 3


@pytest.mark.slow
def test_group_sweep_peaks_at_or_above_planted_count():
    from gprec.config import ExperimentConfig
    from gprec.experiment import load_split, sweep

    cfg = ExperimentConfig()
    cfg.dataset.kind = "synthetic"
    cfg.dataset.synthetic = {"n_groups": 4}
    cfg.train.batch_size = 256
    sp, _ = load_split(cfg)
    rows = sweep("G", [2, 4, 8], cfg, sp, seeds=[0, 1])
    assert len(rows) == 3
    best = max(rows, key=lambda r: r["mean_auc"])
    assert best["value"] >= 4
