import numpy as np
import pytest
from scipy.optimize import approx_fprime
from sklearn.base import clone
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import confusion_matrix
from sklearn.preprocessing import StandardScaler

from railgnss.classify import (
    FeatureStandardizer,
    GradientBoostedTreesClassifier,
    MultinomialLogisticRegression,
    confusion,
    gbt_train,
    load_models,
    make_mlr_pipeline,
    mlr_objective,
    mlr_train,
    permutation_importance,
    save_models,
    softmax,
)
from railgnss.classify.gbt import _best_split, fit_tree
from railgnss.context import FeatureSchema


def blobs(rng, n=300, K=3, F=4, spread=1.0):
    centers = rng.normal(scale=3.0, size=(K, F))
    y = rng.integers(0, K, size=n)
    X = centers[y] + spread * rng.normal(size=(n, F))
    return X, np.array([f"c{k}" for k in y])


def test_objective_gradient_matches_finite_differences(rng):
    X = rng.normal(size=(40, 3))
    Y = np.eye(4)[rng.integers(0, 4, 40)]
    theta = rng.normal(scale=0.3, size=4 * 3 + 4)
    _, grad = mlr_objective(theta, X, Y, 0.1)
    num = approx_fprime(theta, lambda t: mlr_objective(t, X, Y, 0.1)[0], 1e-7)
    np.testing.assert_allclose(grad, num, atol=1e-5)


def test_softmax_rows_sum_to_one_and_stable():
    p = softmax(np.array([[1000.0, 0.0, -1000.0], [0.0, 0.0, 0.0]]))
    np.testing.assert_allclose(p.sum(axis=1), 1.0)
    assert np.all(p > 0)
    np.testing.assert_allclose(p[1], 1 / 3)


def test_training_loss_is_monotone(rng):
    X, y = blobs(rng, spread=2.5)
    clf = MultinomialLogisticRegression(alpha=1e-3, max_iter=300).fit(X, y)
    assert np.all(np.diff(clf.loss_curve_) <= 0)
    gbt = GradientBoostedTreesClassifier(n_rounds=40).fit(X, y)
    assert np.all(np.diff(gbt.train_loss_) <= 0)


@pytest.mark.parametrize("C", [0.1, 10.0])
def test_mlr_matches_sklearn_logistic_regression(rng, C):
    X, y = blobs(rng, n=200, spread=2.0)
    X = StandardScaler().fit_transform(X)
    ours = MultinomialLogisticRegression(alpha=1.0 / (C * len(y)), max_iter=5000, tol=1e-10)
    ours.fit(X, y)
    ref = LogisticRegression(C=C, tol=1e-12, max_iter=10000).fit(X, y)
    np.testing.assert_allclose(ours.predict_proba(X), ref.predict_proba(X), atol=1e-5)
    # Sum-to-zero gauge of the penalized weights is shared.
    np.testing.assert_allclose(ours.coef_, ref.coef_, atol=1e-4)


def test_mlr_cv_picks_larger_lambda_on_ties(rng):
    X, y = blobs(rng, n=150, spread=0.2)  # separable: every lambda scores 1.0
    model, report = mlr_train(X, y, lambda_grid=(1e-3, 1e-2, 1e-1), seed=0)
    assert report.mean_accuracy == [1.0, 1.0, 1.0]
    assert report.best_lambda == 1e-1
    assert model.named_steps["classifier"].alpha == 1e-1
    assert len(report.fold_accuracy[0]) == 5


def test_best_split_matches_brute_force(rng):
    X = rng.normal(size=(30, 3))
    g = rng.normal(size=30)
    h = rng.uniform(0.1, 1.0, size=30)
    lam, min_leaf = 1.0, 3
    best = (-np.inf, None, None)
    for f in range(3):
        for thr in np.unique(X[:, f])[:-1]:
            L = X[:, f] <= thr
            if L.sum() < min_leaf or (~L).sum() < min_leaf:
                continue
            score = lambda m: g[m].sum() ** 2 / (h[m].sum() + lam)  # noqa: E731
            gain = 0.5 * (score(L) + score(~L) - g.sum() ** 2 / (h.sum() + lam))
            if gain > best[0]:
                best = (gain, f, thr)
    gain, f, thr = _best_split(X, g, h, lam, min_leaf)
    assert gain == pytest.approx(best[0], rel=1e-10)
    assert f == best[1]
    np.testing.assert_array_equal(X[:, f] <= thr, X[:, f] <= best[2])


def test_leaf_values_are_newton_steps(rng):
    X = rng.normal(size=(50, 2))
    g, h = rng.normal(size=50), rng.uniform(0.2, 1.0, 50)
    tree = fit_tree(X, g, h, max_depth=2, min_leaf=5, reg_lambda=1.0)
    leaves = tree.apply(X)
    for leaf in np.unique(leaves):
        m = leaves == leaf
        assert tree.value[leaf] == pytest.approx(-g[m].sum() / (h[m].sum() + 1.0), rel=1e-12)
        assert m.sum() >= 5
    stump = fit_tree(X, g, h, max_depth=0, min_leaf=5, reg_lambda=1.0)
    assert len(stump.value) == 1


def test_xor_separates_trees_from_linear_model(rng):
    X = rng.uniform(-1, 1, size=(400, 2))
    y = np.where((X[:, 0] > 0) ^ (X[:, 1] > 0), "a", "b")
    lin = make_mlr_pipeline(alpha=1e-4).fit(X, y)
    trees = gbt_train(X, y, {"n_rounds": 50, "max_depth": 3})
    acc_lin = np.mean(lin.predict(X) == y)
    acc_gbt = np.mean(trees.predict(X) == y)
    assert acc_gbt > 0.97
    assert acc_lin < 0.7


def test_single_class_and_bad_params_rejected(rng):
    X = rng.normal(size=(10, 2))
    y = np.array(["a"] * 10)
    with pytest.raises(ValueError, match="two classes"):
        MultinomialLogisticRegression().fit(X, y)
    with pytest.raises(ValueError, match="two classes"):
        GradientBoostedTreesClassifier().fit(X, y)
    y2 = np.array(["a", "b"] * 5)
    with pytest.raises(ValueError, match="degenerate"):
        GradientBoostedTreesClassifier(n_rounds=0, max_depth=0).fit(X, y2)
    with pytest.raises(ValueError):
        GradientBoostedTreesClassifier(base_score="median").fit(X, y2)


def test_estimators_follow_sklearn_conventions():
    est = GradientBoostedTreesClassifier(n_rounds=7, learning_rate=0.3)
    cl = clone(est)
    assert cl.get_params() == est.get_params()
    assert MultinomialLogisticRegression(alpha=2.0).get_params()["alpha"] == 2.0
    with pytest.raises(Exception):
        est.predict(np.zeros((1, 2)))


def test_persistence_roundtrip_predicts_identically(rng, tmp_path):
    X, y = blobs(rng, F=3)
    X[::7, 1] = np.nan
    schema = FeatureSchema.from_names(["a", "b", "c"])
    models = {"mlr": make_mlr_pipeline(alpha=0.01).fit(X, y),
              "gbt": gbt_train(X, y, {"n_rounds": 15})}
    save_models(tmp_path / "model.json", models, schema, config_hash="abc")
    back, doc = load_models(tmp_path / "model.json", schema)
    assert doc["config_hash"] == "abc"
    for kind in models:
        np.testing.assert_array_equal(back[kind].predict_proba(X), models[kind].predict_proba(X))
    with pytest.raises(ValueError, match="schema"):
        load_models(tmp_path / "model.json", FeatureSchema.from_names(["x"]))


def test_confusion_matches_sklearn(rng):
    labels = np.array(["A", "B", "C"])
    t = labels[rng.integers(0, 3, 100)]
    p = labels[rng.integers(0, 3, 100)]
    cm = confusion(t, p, classes=labels)
    np.testing.assert_array_equal(cm.counts, confusion_matrix(t, p, labels=labels))
    assert cm.accuracy == pytest.approx(np.mean(t == p))
    assert cm.total == 100
    with pytest.raises(ValueError):
        confusion(t, p[:-1])


def test_permutation_importance_deterministic_and_sensible(rng):
    X, y = blobs(rng, F=2, spread=0.5)
    X = np.column_stack([X, rng.normal(size=len(y))])  # pure noise column
    model = make_mlr_pipeline(alpha=0.01).fit(X, y)
    a = permutation_importance(model, X, y, n_repeats=5, seed=3, feature_names=["x", "y", "n"])
    b = permutation_importance(model, X, y, n_repeats=5, seed=3, feature_names=["x", "y", "n"])
    assert a.names == b.names
    np.testing.assert_array_equal(a.importance, b.importance)
    assert a.names[-1] == "n"
    assert abs(a.importance[-1]) < 0.05
    assert a.importance[0] > 0.1


def test_standardizer_matches_standard_scaler(rng):
    X = rng.normal(loc=3.0, scale=2.0, size=(50, 4))
    np.testing.assert_allclose(FeatureStandardizer().fit_transform(X),
                               StandardScaler().fit_transform(X), atol=1e-12)


def test_standardizer_masks_and_constants():
    X = np.array([[1.0, np.nan, 5.0], [3.0, np.nan, 5.0], [np.nan, np.nan, 5.0]])
    s = FeatureStandardizer().fit(X)
    assert s.mean_[0] == 2.0 and s.scale_[0] == 1.0
    assert list(s.constant_) == [False, True, True]
    Z = s.transform(X)
    assert np.all(np.isfinite(Z))
    assert Z[2, 0] == 0.0
    np.testing.assert_array_equal(Z[:, 1:], 0.0)
    with pytest.raises(ValueError):
        s.transform(np.zeros((1, 2)))
