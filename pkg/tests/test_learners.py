import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import as_nested, oracle_cases, oracle_tree

from losml.learners import (
    FeatureImportance,
    LearnerError,
    LogisticModel,
    LogisticParams,
    TreeModel,
    TreeParams,
    best_split,
    entropy,
    feature_importance,
    fit_logistic,
    fit_tree,
    gini,
    information_gain,
    logistic_predict_proba,
    tree_predict,
)


# ---- impurity ---------------------------------------------------------------


def test_entropy_examples():
    assert entropy([0.5, 0.5]) == 1.0
    assert entropy([1.0, 0.0]) == 0.0
    assert entropy([0.25, 0.75]) == pytest.approx(0.811278, abs=1e-6)


def test_gini_examples():
    assert gini([0.5, 0.5]) == 0.5
    assert gini([0.0, 1.0]) == 0.0
    assert gini([0.25, 0.75]) == 0.375


def test_impurity_rejects_negative():
    with pytest.raises(LearnerError):
        entropy([-0.1, 1.1])
    with pytest.raises(LearnerError):
        gini([1.2, -0.2])


def test_information_gain_examples():
    assert information_gain([2, 2], [2, 0], [0, 2]) == 1.0
    assert information_gain([2, 2], [2, 2], [0, 0]) == 0.0
    expected = entropy([0.75, 0.25]) - 0.5 * 1.0
    assert information_gain([3, 1], [2, 0], [1, 1]) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.3113, abs=1e-4)


def test_information_gain_count_mismatch():
    with pytest.raises(LearnerError):
        information_gain([3, 1], [2, 0], [2, 1])


_props = st.lists(st.floats(0, 1), min_size=2, max_size=6).filter(lambda v: sum(v) > 1e-3)


@given(_props)
def test_impurity_bounds(raw):
    p = np.array(raw) / sum(raw)
    K = len(p)
    assert 0 <= entropy(p) <= math.log2(K) + 1e-12
    assert 0 <= gini(p) <= 1 - 1 / K + 1e-12
    assert entropy(np.full(K, 1 / K)) == pytest.approx(math.log2(K))
    assert gini(np.full(K, 1 / K)) == pytest.approx(1 - 1 / K)


@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=2, max_size=5), st.sampled_from(["entropy", "gini"]))
def test_information_gain_nonnegative(pairs, criterion):
    left = np.array([a for a, _ in pairs])
    right = np.array([b for _, b in pairs])
    if (left + right).sum() == 0:
        return
    assert information_gain(left + right, left, right, criterion) >= -1e-12


@given(st.lists(st.integers(1, 9), min_size=2, max_size=5), st.integers(1, 4), st.integers(1, 4), st.sampled_from(["entropy", "gini"]))
def test_information_gain_zero_when_proportions_match(counts, a, b, criterion):
    c = np.array(counts)
    assert abs(information_gain(c * (a + b), c * a, c * b, criterion)) <= 1e-12


# ---- trees ---------------------------------------------------------------------


def test_best_split_single_feature():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([0, 0, 1, 1])
    s = best_split(X, y, np.arange(4), TreeParams(criterion="entropy"))
    assert s.feature == 0 and s.threshold == 2.5 and s.gain == 1.0
    for t in (1.5, 3.5):
        left = X[:, 0] <= t
        ig = information_gain([2, 2], np.bincount(y[left], minlength=2), np.bincount(y[~left], minlength=2))
        assert ig < s.gain


def test_best_split_pure_node():
    X = np.arange(6.0)[:, None]
    assert best_split(X, np.zeros(6, dtype=int), np.arange(6), TreeParams()) is None


def test_best_split_feature_tie():
    X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    y = np.array([0, 0, 1, 1])
    s = best_split(X, y, np.arange(4), TreeParams())
    assert s.feature == 0 and s.threshold == 0.5


def test_best_split_respects_min_leaf():
    X = np.arange(4.0)[:, None]
    y = np.array([0, 1, 1, 1])
    assert best_split(X, y, np.arange(4), TreeParams(min_samples_leaf=2)) is None or \
        best_split(X, y, np.arange(4), TreeParams(min_samples_leaf=2)).threshold == 1.5


def test_fit_tree_separable_depth_one():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([0, 0, 1, 1])
    t = fit_tree(X, y, TreeParams(criterion="entropy"))
    assert t.depth == 1
    assert (t.predict(X) == y).all()
    assert feature_importance(t).items == (("x0", 1.0),)


def test_xor_stump():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] * 2)
    y = np.array([0, 1, 1, 0] * 2)
    t = fit_tree(X, y, TreeParams(max_depth=1, criterion="entropy"))
    assert (t.predict(X) == y).mean() <= 0.75
    # every depth-1 stump is no better
    for f in range(2):
        for left_label, right_label in itertools.product(range(2), repeat=2):
            pred = np.where(X[:, f] <= 0.5, left_label, right_label)
            assert (pred == y).mean() <= 0.75


def test_single_row():
    t = fit_tree(np.array([[3.0, 4.0]]), np.array([2]), n_classes=3)
    assert t.n_leaves == 1
    assert tree_predict(t, [100.0, -5.0])[0] == 2


def test_empty_input():
    with pytest.raises(LearnerError):
        fit_tree(np.zeros((0, 2)), np.zeros(0, dtype=int))


def test_leaf_probabilities():
    X = np.array([[0.0], [0.0], [0.0], [0.0]])
    y = np.array([0, 0, 0, 1])
    cls, proba = tree_predict(fit_tree(X, y), [0.0])
    assert cls == 0 and proba.tolist() == [0.75, 0.25]


def test_width_mismatch():
    t = fit_tree(np.eye(3), np.array([0, 1, 2]))
    with pytest.raises(LearnerError):
        t.predict(np.zeros((1, 2)))


def test_importance_concentrates_on_used_feature():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 4))
    y = (X[:, 2] > 0).astype(int)
    imp = feature_importance(fit_tree(X, y), ["a", "b", "c", "d"])
    assert imp.items[0] == ("c", 1.0)
    assert not imp.degenerate


def test_importance_normalization():
    class Stub:
        importance = np.array([0.6, 0.2])

    imp = feature_importance(Stub(), ["a", "b"])
    assert imp.items[0] == ("a", pytest.approx(0.75)) and imp.items[1] == ("b", pytest.approx(0.25))


def test_importance_without_splits():
    t = fit_tree(np.zeros((3, 2)), np.array([0, 0, 0]))
    imp = feature_importance(t)
    assert imp.degenerate and all(s == 0 for _, s in imp.items)


def test_importance_hand_weighted():
    # root splits x0 (gain 1.0 on 4/4 rows); right child splits x1 on 2/4 rows
    X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 0, 1, 2])
    t = fit_tree(X, y, TreeParams(criterion="entropy"), n_classes=3)
    ig_root = information_gain([2, 1, 1], [2, 0, 0], [0, 1, 1])
    ig_child = information_gain([0, 1, 1], [0, 1, 0], [0, 0, 1])
    assert np.allclose(t.importance, [ig_root, 0.5 * ig_child])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 40), st.integers(1, 4), st.sampled_from(["entropy", "gini"]))
def test_full_tree_fits_consistent_data(seed, n, d, criterion):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, size=(n, d)).astype(float)
    _, inv = np.unique(X, axis=0, return_inverse=True)
    labels = rng.integers(0, 3, size=inv.max() + 1)
    y = labels[inv.ravel()]
    t = fit_tree(X, y, TreeParams(criterion=criterion), n_classes=3)
    assert (t.predict(X) == y).all()
    assert (t.importance >= 0).all()


def test_tree_round_trip():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(80, 3))
    y = rng.integers(0, 3, size=80)
    t = fit_tree(X, y, TreeParams(max_depth=4))
    back = TreeModel.from_dict(t.to_dict())
    assert np.array_equal(back.predict_proba(X), t.predict_proba(X))


# ---- exhaustive greedy oracle ---------------------------------------------------


def test_tree_matches_exhaustive_oracle():
    checked = 0
    for xs, ys, K in oracle_cases():
        X = np.array(xs)
        y = np.array(ys)
        for depth, criterion in itertools.product((1, 2), ("entropy", "gini")):
            model = fit_tree(X, y, TreeParams(criterion=criterion, max_depth=depth), n_classes=K)
            expected = oracle_tree(list(zip(xs, ys)), K, depth, criterion)
            assert as_nested(model) == expected, (xs, ys, depth, criterion)
            checked += 1
    assert checked >= 400


# ---- logistic --------------------------------------------------------------------


def test_logistic_separable():
    X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    y = np.array([0, 0, 1, 1])
    m = fit_logistic(X, y)
    assert m.weights[1, 0] > 0
    assert (m.predict(X) == y).all()


def test_logistic_shrinkage():
    X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    y = np.array([0, 0, 1, 1])
    big = fit_logistic(X, y, LogisticParams(C=1.0))
    small = fit_logistic(X, y, LogisticParams(C=1e-6))
    assert np.abs(small.weights).max() < 1e-3 * np.abs(big.weights).max()


def test_logistic_one_class():
    with pytest.raises(LearnerError, match="degenerate one-class fit"):
        fit_logistic(np.eye(3), np.zeros(3, dtype=int))


def test_logistic_nonfinite():
    with pytest.raises(LearnerError):
        fit_logistic(np.array([[np.inf], [0.0]]), np.array([0, 1]))


def test_logistic_proba_examples():
    m = LogisticModel(np.zeros((2, 3)), np.zeros(2))
    assert logistic_predict_proba(m, np.ones(3)).tolist() == [0.5, 0.5]
    m = LogisticModel(np.array([[-10.0], [10.0]]), np.array([0.0, 0.0]))
    assert logistic_predict_proba(m, [2.0])[1] > 0.99
    with pytest.raises(LearnerError):
        logistic_predict_proba(m, [1.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 6), st.integers(1, 8))
def test_logistic_proba_normalized(seed, K, d):
    rng = np.random.default_rng(seed)
    m = LogisticModel(rng.normal(scale=5, size=(K, d)), rng.normal(scale=5, size=K))
    p = m.predict_proba(rng.normal(scale=3, size=(20, d)))
    assert np.all(np.abs(p.sum(axis=1) - 1) <= 1e-12)
    assert np.all(p > 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([0.01, 0.1, 1.0, 10.0]))
def test_logistic_monotone_and_converged(seed, C):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(60, 4))
    y = rng.integers(0, 3, size=60)
    params = LogisticParams(C=C, tol=1e-6)
    m = fit_logistic(X, y, params)
    for hist in m.objective_history:
        assert np.all(np.diff(hist) <= 1e-12)
    assert max(m.gradient_norms) <= 10 * params.tol


def test_logistic_round_trip():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(30, 2))
    y = rng.integers(0, 3, size=30)
    m = fit_logistic(X, y)
    back = LogisticModel.from_dict(m.to_dict())
    assert np.array_equal(back.predict_proba(X), m.predict_proba(X))
