"""Standardization with mean imputation of masked (NaN) features."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted


class FeatureStandardizer(TransformerMixin, BaseEstimator):
    """Center and scale features, imputing NaN with the training mean.

    Statistics ignore masked entries. A feature with zero spread (or no
    observed value at all) keeps a unit scale and is flagged in
    ``constant_``.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=float, ensure_all_finite="allow-nan")
        with np.errstate(all="ignore"):
            observed = ~np.isnan(X)
            count = observed.sum(axis=0)
            total = np.where(observed, X, 0.0).sum(axis=0)
            mean = np.where(count > 0, total / np.maximum(count, 1), 0.0)
            dev = np.where(observed, X - mean, 0.0)
            var = np.where(count > 0, (dev * dev).sum(axis=0) / np.maximum(count, 1), 0.0)
        scale = np.sqrt(var)
        self.constant_ = ~(scale > 0.0)
        self.mean_ = mean
        self.scale_ = np.where(self.constant_, 1.0, scale)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = check_array(X, dtype=float, ensure_all_finite="allow-nan", copy=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        missing = np.isnan(X)
        X[missing] = np.broadcast_to(self.mean_, X.shape)[missing]
        return (X - self.mean_) / self.scale_
