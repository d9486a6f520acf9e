"""Second-order multiclass gradient boosting with exact greedy trees."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.pipeline import Pipeline
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from railgnss.classify.mlr import softmax
from railgnss.classify.preprocessing import FeatureStandardizer

_HESS_FLOOR = 1e-16
_MAX_ROUND_HALVINGS = 30


@dataclass
class RegressionTree:
    """Axis-aligned tree; ``x[feature] <= threshold`` goes left. Leaves have feature -1."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X):
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return node
            go_left = X[rows, np.where(internal, feat, 0)] <= self.threshold[node]
            node = np.where(internal, np.where(go_left, self.left[node], self.right[node]), node)

    def predict(self, X):
        return self.value[self.apply(X)]

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right",
                                                        "value")}

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["feature"], dtype=np.intp),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.intp),
            np.asarray(d["right"], dtype=np.intp),
            np.asarray(d["value"], dtype=float),
        )


def _best_split(Xn, g, h, reg_lambda, min_leaf):
    """Best (gain, feature, threshold) over all features for one node."""
    m, F = Xn.shape
    if m < 2 * min_leaf:
        return None
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    GL = np.cumsum(g[order], axis=0)[:-1]
    HL = np.cumsum(h[order], axis=0)[:-1]
    G, H = g.sum(), h.sum()
    GR, HR = G - GL, H - HL
    gain = GL ** 2 / (HL + reg_lambda) + GR ** 2 / (HR + reg_lambda) - G ** 2 / (H + reg_lambda)
    n_left = np.arange(1, m)[:, None]
    valid = (n_left >= min_leaf) & (m - n_left >= min_leaf) & (xs[:-1] < xs[1:])
    gain = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(gain))
    i, f = divmod(flat, F)
    best = gain[i, f]
    if not np.isfinite(best) or best <= 1e-12:
        return None
    lo, hi = xs[i, f], xs[i + 1, f]
    thr = 0.5 * (lo + hi)
    if not lo <= thr < hi:
        thr = lo
    return 0.5 * best, f, thr


def fit_tree(X, g, h, max_depth, min_leaf, reg_lambda):
    """Grow one regression tree on gradients ``g`` and hessians ``h``.

    Leaf values are the Newton steps ``-G / (H + reg_lambda)``.
    """
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for arr, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (value, 0.0)):
            arr.append(v)
        return len(feature) - 1

    stack = [(new_node(), np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        gi, hi = g[idx], h[idx]
        value[node] = -gi.sum() / (hi.sum() + reg_lambda)
        if depth >= max_depth:
            continue
        split = _best_split(X[idx], gi, hi, reg_lambda, min_leaf)
        if split is None:
            continue
        _, f, thr = split
        mask = X[idx, f] <= thr
        feature[node], threshold[node] = f, thr
        left[node], right[node] = new_node(), new_node()
        stack.append((right[node], idx[~mask], depth + 1))
        stack.append((left[node], idx[mask], depth + 1))
    return RegressionTree(
        np.array(feature, dtype=np.intp), np.array(threshold), np.array(left, dtype=np.intp),
        np.array(right, dtype=np.intp), np.array(value),
    )


def log_loss(scores, Y):
    p = softmax(scores)
    return float(-np.mean(np.sum(Y * np.log(p), axis=1)))


class GradientBoostedTreesClassifier(ClassifierMixin, BaseEstimator):
    """Multiclass boosting of regression trees on softmax gradients.

    Each round fits one tree per class with second-order leaf weights,
    shrunk by ``learning_rate``. If a round would raise the training
    log-loss its trees are shrunk further until it does not.

    Parameters
    ----------
    n_rounds, max_depth, learning_rate, min_leaf : boosting controls
    reg_lambda : float
        L2 penalty on leaf values.
    base_score : {"prior", "zero"}
        Initial class scores: log class frequencies or zeros.
    random_state : int
        Accepted for API symmetry; the exact greedy learner uses no randomness.
    """

    def __init__(self, n_rounds=200, max_depth=4, learning_rate=0.1, min_leaf=5,
                 reg_lambda=1.0, base_score="prior", random_state=0):
        self.n_rounds = n_rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.min_leaf = min_leaf
        self.reg_lambda = reg_lambda
        self.base_score = base_score
        self.random_state = random_state

    def _check_params(self):
        if self.n_rounds < 0 or self.max_depth < 0:
            raise ValueError("n_rounds and max_depth must be non-negative")
        if self.n_rounds == 0 and self.max_depth == 0:
            raise ValueError("degenerate boosting parameters: no rounds and no depth")
        if self.min_leaf < 1 or self.learning_rate <= 0:
            raise ValueError("min_leaf must be >= 1 and learning_rate > 0")
        if self.base_score not in ("prior", "zero"):
            raise ValueError(f"unknown base_score {self.base_score!r}")

    def fit(self, X, y):
        self._check_params()
        X, y = check_X_y(X, y)
        self.classes_ = unique_labels(y)
        K = len(self.classes_)
        if K < 2:
            raise ValueError("need at least two classes to fit a classifier")
        Y = (y[:, None] == self.classes_[None, :]).astype(float)
        if self.base_score == "prior":
            self.init_score_ = np.log(Y.mean(axis=0))
        else:
            self.init_score_ = np.zeros(K)
        scores = np.tile(self.init_score_, (X.shape[0], 1))
        loss = log_loss(scores, Y)
        self.train_loss_ = [loss]
        self.trees_ = []
        for _ in range(self.n_rounds):
            p = softmax(scores)
            grad = p - Y
            hess = np.maximum(p * (1.0 - p), _HESS_FLOOR)
            trees = [fit_tree(X, grad[:, k], hess[:, k], self.max_depth, self.min_leaf,
                              self.reg_lambda) for k in range(K)]
            for t in trees:
                t.value *= self.learning_rate
            update = np.column_stack([t.predict(X) for t in trees])
            for _ in range(_MAX_ROUND_HALVINGS):
                new_loss = log_loss(scores + update, Y)
                if new_loss <= loss:
                    break
                update *= 0.5
                for t in trees:
                    t.value *= 0.5
            else:
                break
            scores = scores + update
            loss = new_loss
            self.trees_.append(trees)
            self.train_loss_.append(loss)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "trees_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        scores = np.tile(self.init_score_, (X.shape[0], 1))
        for trees in self.trees_:
            for k, t in enumerate(trees):
                scores[:, k] += t.predict(X)
        return scores

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


def make_gbt_pipeline(**params):
    return Pipeline([
        ("standardize", FeatureStandardizer()),
        ("classifier", GradientBoostedTreesClassifier(**params)),
    ])


def gbt_train(X, y, params=None, seed=0):
    """Fit the standardizer and boosted ensemble on ``X, y``."""
    params = dict(params or {})
    params.setdefault("random_state", seed)
    return make_gbt_pipeline(**params).fit(X, y)
