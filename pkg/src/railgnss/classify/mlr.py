"""L2-penalized multinomial logistic regression with cross-validated penalty."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import StratifiedKFold
from sklearn.pipeline import Pipeline
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from railgnss.classify.preprocessing import FeatureStandardizer
from railgnss.errors import NumericalError

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = tuple(float(v) for v in np.logspace(-4, 2, 7))
_ARMIJO = 1e-4


def softmax(scores):
    """Row-wise softmax, shifted for stability and floored at the smallest normal."""
    z = scores - scores.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    p = np.maximum(p, np.finfo(float).tiny)
    return p / p.sum(axis=1, keepdims=True)


def mlr_objective(theta, X, Y, alpha):
    """Mean softmax cross-entropy plus ``alpha/2 * ||W||^2`` and its gradient.

    ``theta`` packs the (K, F) weights followed by the K intercepts; the
    intercepts are not penalized. ``Y`` is the one-hot label matrix.
    """
    n, F = X.shape
    K = Y.shape[1]
    W = theta[:K * F].reshape(K, F)
    b = theta[K * F:]
    S = X @ W.T + b
    S -= S.max(axis=1, keepdims=True)
    logZ = np.log(np.exp(S).sum(axis=1))
    loss = np.mean(logZ - (S * Y).sum(axis=1)) + 0.5 * alpha * np.sum(W * W)
    R = (np.exp(S - logZ[:, None]) - Y) / n
    gW = R.T @ X + alpha * W
    gb = R.sum(axis=0)
    return float(loss), np.concatenate([gW.ravel(), gb])


class MultinomialLogisticRegression(ClassifierMixin, BaseEstimator):
    """Softmax regression fitted by full-batch gradient descent.

    Step sizes come from the Barzilai-Borwein rule and are halved until the
    Armijo condition holds, so the training loss never increases.

    Parameters
    ----------
    alpha : float
        L2 strength on the weights.
    max_iter : int
        Fixed iteration budget.
    tol : float
        Stop once the gradient infinity-norm drops below this.
    """

    def __init__(self, alpha=1.0, max_iter=1000, tol=1e-8):
        self.alpha = alpha
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = unique_labels(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes to fit a classifier")
        n, F = X.shape
        K = len(self.classes_)
        Y = (y[:, None] == self.classes_[None, :]).astype(float)
        theta = np.zeros(K * F + K)
        loss, grad = mlr_objective(theta, X, Y, self.alpha)
        losses = [loss]
        step = 1.0
        for _ in range(self.max_iter):
            gnorm2 = grad @ grad
            if np.max(np.abs(grad)) < self.tol:
                break
            for _ in range(60):
                cand = theta - step * grad
                new_loss, new_grad = mlr_objective(cand, X, Y, self.alpha)
                if np.isfinite(new_loss) and new_loss <= loss - _ARMIJO * step * gnorm2:
                    break
                step *= 0.5
            else:
                break
            if not np.isfinite(new_loss):
                raise NumericalError("non-finite training loss")
            s, g_diff = cand - theta, new_grad - grad
            curv = s @ g_diff
            theta, loss, grad = cand, new_loss, new_grad
            losses.append(loss)
            step = (s @ s) / curv if curv > 0 else 2.0 * step
        if not np.isfinite(loss):
            raise NumericalError("non-finite training loss")
        self.coef_ = theta[:K * F].reshape(K, F).copy()
        self.intercept_ = theta[K * F:].copy()
        self.loss_curve_ = losses
        self.n_iter_ = len(losses) - 1
        self.n_features_in_ = F
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X @ self.coef_.T + self.intercept_

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


@dataclass
class CvReport:
    lambdas: list
    mean_accuracy: list
    fold_accuracy: list = field(default_factory=list)
    best_lambda: float = 0.0
    n_folds: int = 5


def make_mlr_pipeline(alpha=1.0, max_iter=1000):
    return Pipeline([
        ("standardize", FeatureStandardizer()),
        ("classifier", MultinomialLogisticRegression(alpha=alpha, max_iter=max_iter)),
    ])


def mlr_train(X, y, lambda_grid=DEFAULT_LAMBDA_GRID, seed=0, n_folds=5, max_iter=1000):
    """Choose the L2 strength by k-fold accuracy, then refit on all of ``X``.

    Standardization is refit inside every fold. Ties in mean validation
    accuracy go to the larger penalty.

    Returns
    -------
    model : Pipeline
    report : CvReport
    """
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise ValueError("need at least two classes to fit a classifier")
    if counts.min() < 10:
        logger.warning("class %s has only %d samples", classes[counts.argmin()], counts.min())
    folds = StratifiedKFold(n_splits=n_folds, shuffle=True, random_state=seed)
    splits = list(folds.split(X, y))
    grid = sorted(float(v) for v in lambda_grid)
    report = CvReport(lambdas=grid, mean_accuracy=[], n_folds=n_folds)
    for lam in grid:
        accs = []
        for tr, va in splits:
            model = make_mlr_pipeline(lam, max_iter).fit(X[tr], y[tr])
            accs.append(float(np.mean(model.predict(X[va]) == y[va])))
        report.fold_accuracy.append(accs)
        report.mean_accuracy.append(float(np.mean(accs)))
    best = max(range(len(grid)), key=lambda i: (report.mean_accuracy[i], grid[i]))
    report.best_lambda = grid[best]
    return make_mlr_pipeline(report.best_lambda, max_iter).fit(X, y), report
