"""Regularized gradient-boosted decision trees for binary classification.

Second-order boosting on logistic loss with exact greedy split search:
per-sample gradient g = p - y and hessian h = p(1 - p), leaf weights
w* = -soft_threshold(G, l1_alpha) / (H + l2_lambda), and split gain

    gain = 1/2 * [ S(G_L)^2/(H_L + lambda) + S(G_R)^2/(H_R + lambda)
                   - S(G)^2/(H + lambda) ]

where S is the same L1 soft-threshold applied to each gradient sum.
Candidate thresholds sit at midpoints between consecutive distinct sorted
feature values; a sample goes left when feature < threshold. Everything is
deterministic: no subsampling, gain ties break to the lowest feature index
then the lowest threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import FEATURE_NAMES, FeatureVector

MODEL_FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Raised when a model file is malformed or has an unsupported version."""


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 100
    learning_rate: float = 0.03
    max_depth: int = 3
    l1_alpha: float = 0.5
    l2_lambda: float = 2.0
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 0:
            raise ValueError("n_trees must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.l1_alpha < 0 or self.l2_lambda < 0:
            raise ValueError("regularization strengths must be >= 0")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


@dataclass
class TreeNode:
    """One node in a flat tree array; a leaf iff ``feature`` is None."""

    feature: int | None = None
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    gain: float = 0.0
    weight: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


# A tree is a flat list of nodes; index 0 is the root.
Tree = list


@dataclass
class GBDTModel:
    trees: list[Tree]
    base_score: float
    config: TrainConfig
    n_features: int
    # (iteration, train_loss, validation_loss) per boosting round; not serialized.
    history: list[tuple[int, float, float | None]] = field(default_factory=list)

    @property
    def base_logit(self) -> float:
        return logit(self.base_score)


@dataclass(frozen=True)
class ImportanceReport:
    """Gain-based importance shares, one per feature, summing to 1 (or all 0)."""

    shares: tuple[float, ...]
    feature_names: tuple[str, ...]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.feature_names, self.shares))


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def logistic_loss(logits, labels):
    """Elementwise logistic loss -[y log p + (1-y) log(1-p)], numerically safe."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    # log(1 + e^z) computed stably for both signs of z
    softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return softplus - y * z


def logistic_gradient(logits, labels):
    """d loss / d logit = p - y."""
    return sigmoid(np.asarray(logits, dtype=np.float64)) - np.asarray(labels, dtype=np.float64)


def logistic_hessian(logits):
    """d^2 loss / d logit^2 = p (1 - p)."""
    p = sigmoid(np.asarray(logits, dtype=np.float64))
    return p * (1.0 - p)


def soft_threshold(value: float, alpha: float) -> float:
    return math.copysign(max(0.0, abs(value) - alpha), value)


def leaf_weight(grad_sum: float, hess_sum: float, config: TrainConfig) -> float:
    """Closed-form regularized leaf weight."""
    return -soft_threshold(grad_sum, config.l1_alpha) / (hess_sum + config.l2_lambda)


def _node_score(grad_sum: float, hess_sum: float, config: TrainConfig) -> float:
    shrunk = soft_threshold(grad_sum, config.l1_alpha)
    return shrunk * shrunk / (hess_sum + config.l2_lambda)


def _soft_threshold_array(values: np.ndarray, alpha: float) -> np.ndarray:
    return np.sign(values) * np.maximum(0.0, np.abs(values) - alpha)


def _presort_features(X: np.ndarray) -> list[np.ndarray]:
    """Stable per-feature sample orderings, computed once per training set."""
    return [np.argsort(X[:, j], kind="stable") for j in range(X.shape[1])]


def _find_best_split(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    idx: np.ndarray,
    config: TrainConfig,
    presorted: list[np.ndarray],
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, gain) over all exact candidate splits.

    Returns None when no candidate has positive gain. Ties in gain keep the
    first candidate encountered, i.e. lowest feature index then lowest
    threshold, because replacement requires strictly greater gain.
    """
    total_g = float(g[idx].sum())
    total_h = float(h[idx].sum())
    parent_score = _node_score(total_g, total_h, config)
    n = idx.size
    msl = config.min_samples_leaf
    lam = config.l2_lambda
    best: tuple[int, float, float] | None = None
    best_gain = 0.0

    in_node = np.zeros(X.shape[0], dtype=bool)
    in_node[idx] = True
    for feature in range(X.shape[1]):
        order = presorted[feature]
        sorted_idx = order[in_node[order]]
        sorted_vals = X[sorted_idx, feature]
        g_prefix = np.cumsum(g[sorted_idx])
        h_prefix = np.cumsum(h[sorted_idx])

        boundaries = np.nonzero(sorted_vals[:-1] != sorted_vals[1:])[0]
        if boundaries.size == 0:
            continue
        thresholds = (sorted_vals[boundaries] + sorted_vals[boundaries + 1]) / 2.0
        # Left partition is "value < threshold"; resolve the count from the
        # comparison itself so float rounding of the midpoint cannot
        # desynchronize the gain computation from prediction-time routing.
        left_counts = np.searchsorted(sorted_vals, thresholds, side="left")
        valid = (left_counts >= msl) & (n - left_counts >= msl)
        if not np.any(valid):
            continue
        thresholds = thresholds[valid]
        left_counts = left_counts[valid]
        g_left = g_prefix[left_counts - 1]
        h_left = h_prefix[left_counts - 1]
        st_left = _soft_threshold_array(g_left, config.l1_alpha)
        st_right = _soft_threshold_array(total_g - g_left, config.l1_alpha)
        gains = 0.5 * (
            st_left * st_left / (h_left + lam)
            + st_right * st_right / (total_h - h_left + lam)
            - parent_score
        )
        pick = int(np.argmax(gains))  # first max: lowest threshold wins ties
        if gains[pick] > best_gain:
            best_gain = float(gains[pick])
            best = (feature, float(thresholds[pick]), float(gains[pick]))
    return best


def fit_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    config: TrainConfig,
    presorted: list[np.ndarray] | None = None,
) -> Tree:
    """Grow one regression tree on gradients/hessians.

    A root with no positive-gain split collapses to a single zero leaf so the
    tree contributes nothing; deeper nodes that cannot split become leaves at
    their closed-form weight.
    """
    if presorted is None:
        presorted = _presort_features(X)
    nodes: Tree = []

    def build(idx: np.ndarray, depth: int) -> int:
        node_id = len(nodes)
        nodes.append(TreeNode())
        split = None
        if depth < config.max_depth and idx.size >= 2 * config.min_samples_leaf:
            split = _find_best_split(X, g, h, idx, config, presorted)
        if split is None:
            if depth == 0:
                nodes[node_id].weight = 0.0
            else:
                nodes[node_id].weight = leaf_weight(
                    float(g[idx].sum()), float(h[idx].sum()), config
                )
            return node_id
        feature, threshold, gain = split
        left_mask = X[idx, feature] < threshold
        nodes[node_id].feature = feature
        nodes[node_id].threshold = threshold
        nodes[node_id].gain = gain
        nodes[node_id].left = build(idx[left_mask], depth + 1)
        nodes[node_id].right = build(idx[~left_mask], depth + 1)
        return node_id

    build(np.arange(X.shape[0]), 0)
    return nodes


def _tree_predict(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Raw leaf weights for each row (no learning-rate shrinkage)."""
    out = np.zeros(X.shape[0], dtype=np.float64)
    stack = [(0, np.arange(X.shape[0]))]
    while stack:
        node_id, idx = stack.pop()
        if idx.size == 0:
            continue
        node = tree[node_id]
        if node.is_leaf:
            out[idx] = node.weight
            continue
        left_mask = X[idx, node.feature] < node.threshold
        stack.append((node.left, idx[left_mask]))
        stack.append((node.right, idx[~left_mask]))
    return out


def _as_matrix(features) -> np.ndarray:
    if isinstance(features, np.ndarray):
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("feature matrix must be 2-dimensional")
        return X
    return np.array([f.as_array() for f in features], dtype=np.float64)


def train(
    features: Sequence[FeatureVector] | np.ndarray,
    labels: Sequence[bool],
    config: TrainConfig = TrainConfig(),
    eval_set: tuple[np.ndarray, Sequence[bool]] | None = None,
    base_score: float = 0.5,
) -> GBDTModel:
    """Fit the boosted ensemble.

    Deterministic for fixed inputs and config. ``eval_set`` is an optional
    (features, labels) pair whose loss is tracked in the model history.
    """
    X = _as_matrix(features)
    y = np.asarray(labels, dtype=np.float64)
    if X.shape[0] != y.shape[0]:
        raise ValueError("features and labels must have equal length")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training samples")
    if y.min() == y.max():
        raise ValueError("degenerate training set: only one class present")

    X_val = y_val = None
    if eval_set is not None:
        X_val = _as_matrix(eval_set[0])
        y_val = np.asarray(eval_set[1], dtype=np.float64)

    model = GBDTModel(trees=[], base_score=base_score, config=config, n_features=X.shape[1])
    logits = np.full(X.shape[0], model.base_logit, dtype=np.float64)
    val_logits = (
        np.full(X_val.shape[0], model.base_logit, dtype=np.float64) if X_val is not None else None
    )
    presorted = _presort_features(X)

    for iteration in range(config.n_trees):
        g = logistic_gradient(logits, y)
        h = logistic_hessian(logits)
        tree = fit_tree(X, g, h, config, presorted)
        model.trees.append(tree)
        logits += config.learning_rate * _tree_predict(tree, X)
        train_loss = float(logistic_loss(logits, y).mean())
        val_loss = None
        if val_logits is not None:
            val_logits += config.learning_rate * _tree_predict(tree, X_val)
            val_loss = float(logistic_loss(val_logits, y_val).mean())
        model.history.append((iteration, train_loss, val_loss))
    return model


def decision_logit(model: GBDTModel, f: FeatureVector | np.ndarray) -> float:
    x = f.as_array() if isinstance(f, FeatureVector) else np.asarray(f, dtype=np.float64)
    total = model.base_logit
    for tree in model.trees:
        node = tree[0]
        while not node.is_leaf:
            node = tree[node.left] if x[node.feature] < node.threshold else tree[node.right]
        total += model.config.learning_rate * node.weight
    return total


def predict_proba(model: GBDTModel, f: FeatureVector | np.ndarray) -> float:
    """P(VLM correct | features), strictly inside (0, 1)."""
    return float(sigmoid(decision_logit(model, f)))


def predict_proba_batch(model: GBDTModel, features: Sequence[FeatureVector] | np.ndarray) -> np.ndarray:
    X = _as_matrix(features)
    logits = np.full(X.shape[0], model.base_logit, dtype=np.float64)
    for tree in model.trees:
        logits += model.config.learning_rate * _tree_predict(tree, X)
    return sigmoid(logits)


def feature_importance(model: GBDTModel, feature_names: Sequence[str] | None = None) -> ImportanceReport:
    """Per-feature split-gain totals, normalized to sum to 1."""
    if feature_names is None:
        feature_names = FEATURE_NAMES if model.n_features == len(FEATURE_NAMES) else tuple(
            f"feature_{i}" for i in range(model.n_features)
        )
    gains = np.zeros(model.n_features, dtype=np.float64)
    for tree in model.trees:
        for node in tree:
            if not node.is_leaf:
                gains[node.feature] += node.gain
    total = gains.sum()
    if total <= 0.0:
        shares = tuple(0.0 for _ in range(model.n_features))
    else:
        shares = tuple(float(v) for v in gains / total)
    return ImportanceReport(shares=shares, feature_names=tuple(feature_names))


def _tree_to_jsonable(tree: Tree) -> list[dict]:
    out = []
    for node in tree:
        if node.is_leaf:
            out.append({"weight": node.weight})
        else:
            out.append(
                {
                    "feature": node.feature,
                    "threshold": node.threshold,
                    "gain": node.gain,
                    "left": node.left,
                    "right": node.right,
                }
            )
    return out


def _tree_from_jsonable(raw: list[dict]) -> Tree:
    tree: Tree = []
    for obj in raw:
        if "weight" in obj:
            tree.append(TreeNode(weight=float(obj["weight"])))
        else:
            tree.append(
                TreeNode(
                    feature=int(obj["feature"]),
                    threshold=float(obj["threshold"]),
                    gain=float(obj["gain"]),
                    left=int(obj["left"]),
                    right=int(obj["right"]),
                )
            )
    return tree


def save_model(model: GBDTModel, path: str | Path) -> None:
    """Write the model as versioned JSON; floats keep full round-trip precision."""
    payload = {
        "version": MODEL_FORMAT_VERSION,
        "base_score": model.base_score,
        "config": asdict(model.config),
        "n_features": model.n_features,
        "trees": [_tree_to_jsonable(t) for t in model.trees],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> GBDTModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from None
    if not isinstance(payload, dict) or "version" not in payload:
        raise ModelFormatError("malformed model file: missing version field")
    if payload["version"] != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model version {payload['version']!r} (expected {MODEL_FORMAT_VERSION})"
        )
    try:
        config = TrainConfig(**payload["config"])
        trees = [_tree_from_jsonable(t) for t in payload["trees"]]
        return GBDTModel(
            trees=trees,
            base_score=float(payload["base_score"]),
            config=config,
            n_features=int(payload.get("n_features", len(FEATURE_NAMES))),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from None
