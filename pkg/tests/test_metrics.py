import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ktvgl.metrics import (auc_pr, auc_roc, best_f1, evaluate, score_edges, tdr,
                           temporal_deviation)


def brute_auc_roc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    wins = sum((p > n) + 0.5 * (p == n) for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def brute_pr(scores, labels):
    """Exhaustive sweep over every distinct threshold (predict positive iff score >= thr)."""
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=float)
    pts = []
    for thr in sorted(set(scores.tolist()), reverse=True):
        pred = scores >= thr
        tp = np.sum(pred & labels)
        pts.append((tp / labels.sum(), tp / pred.sum()))
    ap, prev_r, f1 = 0.0, 0.0, 0.0
    for r, p in pts:
        ap += (r - prev_r) * p
        prev_r = r
        if p + r > 0:
            f1 = max(f1, 2 * p * r / (p + r))
    return ap, f1


def test_two_point_examples():
    assert auc_roc([0.9, 0.1], [1, 0]) == 1.0
    assert auc_pr([0.9, 0.1], [1, 0]) == 1.0
    assert best_f1([0.9, 0.1], [1, 0]) == 1.0
    assert auc_roc([0.1, 0.9], [1, 0]) == 0.0


def test_four_point_example():
    s, l = [0.8, 0.6, 0.4, 0.2], [1, 0, 1, 0]
    assert auc_roc(s, l) == pytest.approx(0.75)
    # precision 1 at recall 1/2, 2/3 at recall 1
    assert auc_pr(s, l) == pytest.approx(0.5 * 1 + 0.5 * 2 / 3)
    assert best_f1(s, l) == pytest.approx(0.8)


def test_ties_count_half():
    assert auc_roc([0.5, 0.5], [1, 0]) == 0.5


def test_degenerate_labels_rejected():
    for fn in (auc_roc, auc_pr, best_f1):
        with pytest.raises(ValueError):
            fn([0.1, 0.2], [1, 1])


score_lists = st.lists(st.integers(0, 6), min_size=2, max_size=50)


@settings(max_examples=150, deadline=None)
@given(score_lists, st.data())
def test_matches_brute_force(ints, data):
    labels = data.draw(st.lists(st.booleans(), min_size=len(ints), max_size=len(ints)))
    if all(labels) or not any(labels):
        labels[0] = not labels[0]
        if all(labels) or not any(labels):
            labels[1] = not labels[1]
    scores = [i / 7 for i in ints]
    assert auc_roc(scores, labels) == pytest.approx(brute_auc_roc(scores, labels), abs=1e-12)
    ap, f1 = brute_pr(scores, labels)
    assert auc_pr(scores, labels) == pytest.approx(ap, abs=1e-12)
    assert best_f1(scores, labels) == pytest.approx(f1, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_auc_invariant_under_monotone_transform(seed):
    rng = np.random.default_rng(seed)
    s = rng.random(30)
    l = rng.random(30) < 0.4
    l[:2] = [True, False]
    assert auc_roc(np.exp(3 * s) + 1, l) == pytest.approx(auc_roc(s, l), abs=1e-12)


def test_random_scores_give_half():
    rng = np.random.default_rng(0)
    vals = [auc_roc(rng.random(400), rng.random(400) < 0.3) for _ in range(50)]
    assert abs(np.mean(vals) - 0.5) < 0.05


def test_temporal_deviation_and_tdr_hand_example():
    # T=10, one jump between steps 4 and 5: nine deviations, one nonzero
    path = np.stack([np.eye(2)] * 5 + [2 * np.eye(2)] * 5)
    td = temporal_deviation(path)
    assert td.shape == (9,)
    assert np.count_nonzero(td) == 1 and td[4] == pytest.approx(0.5)
    assert tdr(path, [5]) == pytest.approx(9.0)


def test_tdr_errors():
    path = np.stack([np.eye(2)] * 4)
    with pytest.raises(ValueError):
        tdr(path, [2])  # constant path: 0/0
    with pytest.raises(ValueError):
        tdr(path, [])
    with pytest.raises(ValueError):
        tdr(np.stack([np.eye(2), 2 * np.eye(2)]), [2])


def test_td_zero_exactly_on_constant_segments():
    rng = np.random.default_rng(1)
    a, b = rng.random((2, 3, 3)) + np.eye(3)
    path = np.stack([a] * 3 + [b] * 4)
    td = temporal_deviation(path)
    assert np.all(td[[0, 1, 3, 4, 5]] == 0) and td[2] > 0


def _truth():
    rng = np.random.default_rng(2)
    th = np.eye(4) * 2
    th[0, 1] = th[1, 0] = 0.5
    th[2, 3] = th[3, 2] = -0.3
    return [np.stack([th] * 5), np.stack([np.eye(3) + 0.2 * (1 - np.eye(3))] * 5)], rng


def test_perfect_estimate_scores_one():
    truth, _ = _truth()
    truth[1][:, 0, 2] = truth[1][:, 2, 0] = 0
    rep = evaluate(truth, truth)
    assert rep.summary["aucroc"] == 1.0 and rep.summary["aucpr"] == 1.0


def test_score_edges_excludes_diagonal():
    truth, _ = _truth()
    scored = score_edges(truth, truth)
    assert scored[0][0].shape == (5, 6) and scored[1][0].shape == (5, 3)


def test_flattened_scope_builds_kronecker_truth():
    truth, rng = _truth()
    est = rng.random((5, 12, 12))
    est = est + np.swapaxes(est, 1, 2)
    (scores, labels), = score_edges(est, truth, scope="flattened")
    K = np.kron(truth[0][0], truth[1][0])
    iu = np.triu_indices(12, 1)
    np.testing.assert_array_equal(labels[0], K[iu] != 0)
    with pytest.raises(Exception):
        score_edges(est, truth, scope="flattened", cap=11)


def test_per_time_pooling_differs_but_is_bounded():
    truth, rng = _truth()
    truth[1][:, 0, 2] = truth[1][:, 2, 0] = 0
    est = [th + 0.3 * rng.random(th.shape) for th in truth]
    a = evaluate(est, truth, pooling="pooled").summary["aucroc"]
    b = evaluate(est, truth, pooling="per-time").summary["aucroc"]
    assert 0 <= a <= 1 and 0 <= b <= 1


def test_tdr_needs_change_points():
    truth, _ = _truth()
    truth[1][:, 0, 2] = truth[1][:, 2, 0] = 0
    with pytest.raises(ValueError):
        evaluate(truth, truth, metrics=["tdr"])
    with pytest.raises(ValueError):
        evaluate(truth, truth, metrics=["nope"])
