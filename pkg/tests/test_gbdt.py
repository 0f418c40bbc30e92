from __future__ import annotations

import json
import math

import numpy as np
import pytest

from spatial_trust import evalkit
from spatial_trust.gbdt import (
    GBDTModel,
    ModelFormatError,
    TrainConfig,
    TreeNode,
    feature_importance,
    fit_tree,
    leaf_weight,
    load_model,
    logistic_gradient,
    logistic_hessian,
    logistic_loss,
    predict_proba,
    predict_proba_batch,
    save_model,
    soft_threshold,
    train,
)


def exhaustive_best_split(X, g, h, config):
    """Independent oracle: enumerate every midpoint split and its gain.

    Returns (feature, threshold, gain) of the best positive-gain split under
    the same tie-break order (lowest feature, then lowest threshold), or None.
    """

    def st(v):
        return math.copysign(max(0.0, abs(v) - config.l1_alpha), v)

    def score(G, H):
        return st(G) ** 2 / (H + config.l2_lambda)

    parent = score(g.sum(), h.sum())
    best = None
    for feature in range(X.shape[1]):
        for a, b in zip(*(lambda v: (v[:-1], v[1:]))(np.unique(X[:, feature]))):
            threshold = (float(a) + float(b)) / 2.0
            left = X[:, feature] < threshold
            n_left = int(left.sum())
            if n_left < config.min_samples_leaf or len(g) - n_left < config.min_samples_leaf:
                continue
            gain = 0.5 * (
                score(g[left].sum(), h[left].sum())
                + score(g[~left].sum(), h[~left].sum())
                - parent
            )
            if gain > 0 and (best is None or gain > best[2]):
                best = (feature, threshold, gain)
    return best


def random_two_class_dataset(rng, n_max=8, gridded=False):
    n = int(rng.integers(2, n_max + 1))
    if gridded:
        X = rng.choice([0.0, 0.25, 0.5, 0.75, 1.0], size=(n, 4))
    else:
        X = rng.random((n, 4))
    y = rng.integers(0, 2, size=n).astype(float)
    y[0], y[1] = 0.0, 1.0  # force both classes
    return X, y


class TestLossDerivatives:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        logits = rng.uniform(-6, 6, size=1000)
        labels = rng.integers(0, 2, size=1000).astype(float)
        eps = 1e-4
        numeric = (logistic_loss(logits + eps, labels) - logistic_loss(logits - eps, labels)) / (
            2 * eps
        )
        assert np.abs(numeric - logistic_gradient(logits, labels)).max() < 1e-6

    def test_hessian_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        logits = rng.uniform(-6, 6, size=1000)
        labels = rng.integers(0, 2, size=1000).astype(float)
        eps = 1e-4
        numeric = (
            logistic_loss(logits + eps, labels)
            - 2 * logistic_loss(logits, labels)
            + logistic_loss(logits - eps, labels)
        ) / eps**2
        assert np.abs(numeric - logistic_hessian(logits)).max() < 1e-4


class TestLeafWeight:
    def test_soft_threshold(self):
        assert soft_threshold(-2.0, 0.5) == -1.5
        assert soft_threshold(2.0, 0.5) == 1.5
        assert soft_threshold(0.3, 0.5) == 0.0
        assert soft_threshold(-0.3, 0.5) == 0.0

    def test_four_positive_hand_example(self):
        # 4 samples, all label 1, base 0.5: g = -0.5 each, h = 0.25 each
        # G = -2, H = 1, w* = 1.5 / 3 = 0.5
        assert leaf_weight(-2.0, 1.0, TrainConfig()) == 0.5

    def test_single_leaf_model_prediction(self):
        # leaf contributes lr * w* = 0.03 * 0.5 = 0.015 to the logit
        model = GBDTModel(
            trees=[[TreeNode(weight=0.5)]], base_score=0.5, config=TrainConfig(), n_features=4
        )
        expected = 1.0 / (1.0 + math.exp(-0.015))
        assert predict_proba(model, np.zeros(4)) == pytest.approx(expected, abs=1e-12)
        assert predict_proba(model, np.ones(4)) == pytest.approx(0.50375, abs=1e-5)


class TestTrain:
    def test_empty_model_predicts_base_score(self):
        model = GBDTModel(trees=[], base_score=0.5, config=TrainConfig(), n_features=4)
        assert predict_proba(model, np.array([0.1, 0.2, 0.3, 0.4])) == 0.5

    def test_single_class_rejected(self):
        X = np.random.default_rng(0).random((6, 4))
        with pytest.raises(ValueError, match="degenerate training set"):
            train(X, [True] * 6)

    def test_linearly_separable_reaches_perfect_training_auroc(self):
        X = np.zeros((8, 4))
        X[:, 0] = np.arange(8) / 8.0
        y = X[:, 0] > 0.45
        model = train(X, y, TrainConfig())
        scores = predict_proba_batch(model, X)
        assert evalkit.auroc(scores, y) == 1.0

    def test_constant_features_give_zero_leaf_trees(self):
        X = np.full((10, 4), 0.7)
        y = np.array([0, 1] * 5, dtype=float)
        model = train(X, y, TrainConfig(n_trees=20))
        assert len(model.trees) == 20
        for tree in model.trees:
            assert len(tree) == 1
            assert tree[0].is_leaf and tree[0].weight == 0.0
        assert predict_proba(model, np.full(4, 0.7)) == 0.5

    def test_deterministic_training(self, tmp_path):
        rng = np.random.default_rng(5)
        X = rng.random((60, 4))
        y = rng.integers(0, 2, size=60).astype(bool)
        y[:2] = [False, True]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_model(train(X, y, TrainConfig(n_trees=25)), a)
        save_model(train(X, y, TrainConfig(n_trees=25)), b)
        assert a.read_bytes() == b.read_bytes()

    def test_monotone_training_loss(self):
        rng = np.random.default_rng(9)
        X = rng.random((200, 4))
        y = (X[:, 0] + 0.3 * rng.standard_normal(200)) > 0.5
        model = train(X, y, TrainConfig())
        losses = [loss for _, loss, _ in model.history]
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_eval_set_losses_recorded(self):
        rng = np.random.default_rng(2)
        X = rng.random((50, 4))
        y = X[:, 1] > 0.5
        Xv = rng.random((20, 4))
        yv = Xv[:, 1] > 0.5
        model = train(X, y, TrainConfig(n_trees=5), eval_set=(Xv, yv))
        assert len(model.history) == 5
        assert all(val is not None for _, _, val in model.history)

    def test_exact_tree_count(self):
        rng = np.random.default_rng(3)
        X = rng.random((30, 4))
        y = X[:, 2] > 0.5
        model = train(X, y, TrainConfig(n_trees=17))
        assert len(model.trees) == 17

    def test_predictions_strictly_inside_unit_interval(self):
        rng = np.random.default_rng(4)
        X = rng.random((100, 4))
        y = X[:, 0] > 0.5
        model = train(X, y, TrainConfig())
        scores = predict_proba_batch(model, rng.random((200, 4)))
        assert np.all(scores > 0.0) and np.all(scores < 1.0)


class TestSplitOracle:
    def test_first_tree_matches_exhaustive_enumeration(self):
        rng = np.random.default_rng(42)
        checked_splits = 0
        for trial in range(100):
            X, y = random_two_class_dataset(rng, gridded=trial % 3 == 0)
            config = TrainConfig(n_trees=1, max_depth=1)
            model = train(X, y, config)
            root = model.trees[0][0]

            g = 0.5 - y  # gradients at base logit 0
            h = np.full(len(y), 0.25)
            expected = exhaustive_best_split(X, g, h, config)
            if expected is None:
                assert root.is_leaf and root.weight == 0.0
                continue
            feature, threshold, _ = expected
            assert (root.feature, root.threshold) == (feature, threshold)

            left = X[:, feature] < threshold
            for child_id, mask in ((root.left, left), (root.right, ~left)):
                child = model.trees[0][child_id]
                assert child.is_leaf
                expected_weight = -soft_threshold(float(g[mask].sum()), 0.5) / (
                    float(h[mask].sum()) + 2.0
                )
                assert child.weight == pytest.approx(expected_weight, abs=1e-9)
                checked_splits += 1
        assert checked_splits > 50  # most random datasets must actually split

    def test_gain_tie_break_prefers_lowest_feature(self):
        # features 0 and 1 are identical columns: identical candidate gains
        X = np.array([[0.0, 0.0, 0.5, 0.5], [1.0, 1.0, 0.5, 0.5]] * 3)
        y = np.array([0, 1] * 3, dtype=float)
        model = train(X, y, TrainConfig(n_trees=1, max_depth=1))
        assert model.trees[0][0].feature == 0


class TestRegularization:
    def _leaf_stats(self, tree, X, g, h):
        """Route samples to leaves and return per-leaf (G, H, weight)."""
        out = []
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node_id, idx = stack.pop()
            node = tree[node_id]
            if node.is_leaf:
                out.append((float(g[idx].sum()), float(h[idx].sum()), node.weight))
                continue
            mask = X[idx, node.feature] < node.threshold
            stack.append((node.left, idx[mask]))
            stack.append((node.right, idx[~mask]))
        return out

    def test_larger_l2_never_increases_leaf_magnitude(self):
        rng = np.random.default_rng(7)
        X = rng.random((80, 4))
        y = X[:, 0] > 0.5
        base_config = TrainConfig(n_trees=1)
        model = train(X, y, base_config)
        g = 0.5 - y.astype(float)
        h = np.full(len(y), 0.25)
        for G, H, weight in self._leaf_stats(model.trees[0], X, g, h):
            for stronger in (3.0, 5.0, 20.0):
                heavier = leaf_weight(G, H, TrainConfig(l2_lambda=stronger))
                assert abs(heavier) <= abs(weight) + 1e-15


class TestPiecewiseConstant:
    def test_perturbation_without_threshold_crossing_keeps_output(self):
        rng = np.random.default_rng(11)
        X = rng.random((150, 4))
        y = (X[:, 0] + X[:, 1]) > 1.0
        model = train(X, y, TrainConfig(n_trees=40))
        thresholds = [sorted({n.threshold for t in model.trees for n in t
                              if not n.is_leaf and n.feature == j}) for j in range(4)]
        for _ in range(50):
            x = rng.random(4)
            x2 = x.copy()
            for j in range(4):
                cuts = np.array(thresholds[j])
                lo = cuts[cuts <= x[j]].max() if np.any(cuts <= x[j]) else 0.0
                hi = cuts[cuts > x[j]].min() if np.any(cuts > x[j]) else 1.0
                x2[j] = rng.uniform(lo, hi) if hi > lo else x[j]
                # keep strictly inside the same cell
                if x2[j] == hi:
                    x2[j] = (lo + hi) / 2
            assert predict_proba(model, x) == predict_proba(model, x2)


class TestFeatureImportance:
    def test_single_feature_split_gets_full_share(self):
        X = np.zeros((8, 4))
        X[:, 0] = np.arange(8) / 8.0
        y = X[:, 0] > 0.45
        model = train(X, y, TrainConfig(n_trees=10))
        report = feature_importance(model)
        assert report.shares[0] == 1.0
        assert report.shares[1:] == (0.0, 0.0, 0.0)

    def test_zero_leaf_model_all_zero(self):
        X = np.full((6, 4), 0.2)
        y = np.array([0, 1, 0, 1, 0, 1], dtype=float)
        model = train(X, y, TrainConfig(n_trees=5))
        assert feature_importance(model).shares == (0.0, 0.0, 0.0, 0.0)

    def test_shares_sum_to_one(self):
        rng = np.random.default_rng(12)
        X = rng.random((120, 4))
        y = (X[:, 0] + 0.5 * X[:, 2]) > 0.8
        model = train(X, y, TrainConfig())
        report = feature_importance(model)
        assert sum(report.shares) == pytest.approx(1.0, abs=1e-9)
        assert all(s >= 0 for s in report.shares)

    def test_named_report(self):
        X = np.zeros((8, 4))
        X[:, 0] = np.arange(8) / 8.0
        model = train(X, X[:, 0] > 0.45, TrainConfig(n_trees=3))
        assert feature_importance(model).as_dict()["alpha_geo"] == 1.0


class TestSerialization:
    def _model(self):
        rng = np.random.default_rng(21)
        X = rng.random((70, 4))
        y = (X[:, 0] * X[:, 3]) > 0.25
        return train(X, y, TrainConfig(n_trees=30))

    def test_round_trip_preserves_predictions(self, tmp_path):
        model = self._model()
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        rng = np.random.default_rng(22)
        X = rng.random((100, 4))
        assert np.array_equal(predict_proba_batch(model, X), predict_proba_batch(loaded, X))

    def test_truncated_file_rejected(self, tmp_path):
        model = self._model()
        path = tmp_path / "model.json"
        save_model(model, path)
        path.write_text(path.read_text()[: len(path.read_text()) // 2])
        with pytest.raises(ModelFormatError, match="malformed"):
            load_model(path)

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"version": 99, "base_score": 0.5, "config": {}, "trees": []}))
        with pytest.raises(ModelFormatError, match="version"):
            load_model(path)

    def test_missing_version_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"base_score": 0.5}))
        with pytest.raises(ModelFormatError, match="version"):
            load_model(path)
