"""Minimum Covariance Determinant estimators.

``mcd_exact`` enumerates every h-subset and is only usable on tiny samples;
it is the reference ``fast_mcd`` is checked against. ``fast_mcd`` follows
Rousseeuw & van Driessen (1999): random elemental starts, concentration
steps, and a final polish of the best few candidates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from railgnss.errors import NumericalError

EXACT_MAX_N = 20
REWEIGHT_QUANTILE = 0.975
_DET_SLACK = 1e-10


@dataclass(frozen=True)
class McdResult:
    location: np.ndarray
    scatter: np.ndarray
    h: int
    raw_determinant: float
    consistency_factor: float
    support: np.ndarray
    det_history: tuple = field(default=())


def _as_points(points):
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("points must be a 1-D or 2-D array")
    return X


def min_subset_size(n, d):
    return (n + d + 2) // 2  # ceil((n + d + 1) / 2)


def _check_h(n, d, h):
    lo = min_subset_size(n, d)
    if not lo <= h <= n:
        raise ValueError(f"h must be in [{lo}, {n}] for n={n}, d={d}; got {h}")


def consistency_factor(h, n, d):
    """Scale that makes the h-subset covariance consistent at the normal model."""
    if h >= n:
        return 1.0
    alpha = h / n
    q = stats.chi2.ppf(alpha, d)
    return alpha / stats.chi2.cdf(q, d + 2)


def _mean_cov(X):
    mu = X.mean(axis=0)
    D = X - mu
    return mu, D.T @ D / (X.shape[0] - 1)


def mcd_exact(points, h):
    """Exhaustive MCD: the h-subset whose covariance has the smallest determinant.

    Raises ValueError for ``n > 20`` and NumericalError when the best
    subset is rank deficient.
    """
    X = _as_points(points)
    n, d = X.shape
    if n > EXACT_MAX_N:
        raise ValueError(f"exhaustive MCD limited to n <= {EXACT_MAX_N}, got n={n}")
    _check_h(n, d, h)
    best_det, best_idx = math.inf, None
    combos = itertools.combinations(range(n), h)
    while True:
        chunk = np.array(list(itertools.islice(combos, 20000)), dtype=np.intp)
        if chunk.size == 0:
            break
        S = X[chunk]  # (m, h, d)
        D = S - S.mean(axis=1, keepdims=True)
        C = np.einsum("mhi,mhj->mij", D, D) / (h - 1)
        dets = np.linalg.det(C)
        k = int(np.argmin(dets))
        if dets[k] < best_det:
            best_det, best_idx = float(dets[k]), chunk[k]
    if not best_det > 0.0:
        raise NumericalError("MCD subset covariance is singular")
    mu, cov = _mean_cov(X[best_idx])
    factor = consistency_factor(h, n, d)
    support = np.zeros(n, dtype=bool)
    support[best_idx] = True
    return McdResult(mu, cov * factor, h, best_det, factor, support, (best_det,))


def _mahalanobis_sq(X, mu, cov):
    D = X - mu
    sol = np.linalg.solve(cov, D.T)
    return np.einsum("ij,ji->i", D, sol)


def _c_step(X, idx, h):
    """One concentration step: the h points closest to the current subset's fit."""
    mu, cov = _mean_cov(X[idx])
    if not np.linalg.det(cov) > 0.0:
        return None
    d2 = _mahalanobis_sq(X, mu, cov)
    return np.sort(np.argpartition(d2, h - 1)[:h])


def _det(X, idx):
    return float(np.linalg.det(_mean_cov(X[idx])[1]))


def _elemental_start(X, rng):
    n, d = X.shape
    perm = rng.permutation(n)
    k = d + 1
    while k <= n:
        idx = perm[:k]
        cov = _mean_cov(X[idx])[1]
        if np.linalg.det(cov) > 0.0:
            return idx
        k += 1
    return None


def _concentrate(X, idx, h, max_steps, history):
    """C-steps until the determinant stops decreasing or the subset repeats."""
    det = _det(X, idx)
    for _ in range(max_steps):
        new = _c_step(X, idx, h)
        if new is None or np.array_equal(new, idx):
            break
        new_det = _det(X, new)
        if new_det > det * (1.0 + _DET_SLACK):
            raise NumericalError("concentration step increased the covariance determinant")
        if not new_det < det:
            break
        history.append(new_det)
        idx, det = new, new_det
    return idx, det


def _search(X, h, rng, n_starts, c_steps):
    """Random starts with a few C-steps each; candidates sorted by determinant."""
    candidates = []
    for _ in range(n_starts):
        start = _elemental_start(X, rng)
        if start is None:
            continue
        mu, cov = _mean_cov(X[start])
        idx = np.sort(np.argpartition(_mahalanobis_sq(X, mu, cov), h - 1)[:h])
        hist = [_det(X, idx)]
        idx, det = _concentrate(X, idx, h, c_steps, hist)
        if det > 0.0:
            candidates.append((det, idx, hist))
    candidates.sort(key=lambda c: c[0])
    return candidates


def _refine(X, h, fits, c_steps, keep):
    """Restart each (location, scatter) fit on ``X`` and run C-steps."""
    out = []
    for mu, cov in fits:
        idx = np.sort(np.argpartition(_mahalanobis_sq(X, mu, cov), h - 1)[:h])
        hist = [_det(X, idx)]
        idx, det = _concentrate(X, idx, h, c_steps, hist)
        if det > 0.0:
            out.append((det, idx, hist))
    out.sort(key=lambda c: c[0])
    return out[:keep]


def fast_mcd(points, h, seed=0, n_starts=500, c_steps=2, n_best=10, max_c_steps=200,
             subset_threshold=600, merged_size=1500):
    """Randomized MCD search.

    Each start draws a random (d+1)-subset (grown until its covariance is
    non-singular), takes its h closest points and applies ``c_steps``
    concentration steps. The ``n_best`` lowest-determinant candidates are
    then iterated to convergence and the best one is returned.

    Above ``subset_threshold`` points the starts run inside up to five
    disjoint random subsamples of ``merged_size`` points in total; their
    best fits are refined on the merged subsample and only the final
    ``n_best`` are concentrated on the full data.
    """
    X = _as_points(points)
    n, d = X.shape
    if n <= d:
        raise ValueError("fast_mcd needs more points than dimensions")
    _check_h(n, d, h)
    rng = np.random.default_rng(seed)
    if h == n:
        candidates = [(_det(X, np.arange(n)), np.arange(n), [])]
    elif n <= subset_threshold:
        candidates = _search(X, h, rng, n_starts, c_steps)
    else:
        m = min(n, merged_size)
        n_sub = max(1, min(5, m // 300))
        merged = X[rng.choice(n, size=m, replace=False)]
        pieces = np.array_split(merged, n_sub)
        fits = []
        for piece in pieces:
            h_sub = max(min_subset_size(len(piece), d), math.ceil(len(piece) * h / n))
            for _, idx, _ in _search(piece, h_sub, rng, n_starts // n_sub, c_steps)[:n_best]:
                fits.append(_mean_cov(piece[idx]))
        h_merged = max(min_subset_size(m, d), math.ceil(m * h / n))
        best_merged = _refine(merged, h_merged, fits, c_steps, n_best)
        candidates = _refine(X, h, [_mean_cov(merged[idx]) for _, idx, _ in best_merged],
                             c_steps, n_best)
    if not candidates:
        raise NumericalError("all MCD starts were degenerate")
    best = None
    for det, idx, hist in candidates[:n_best]:
        idx, det = _concentrate(X, idx, h, max_c_steps, hist)
        if det > 0.0 and (best is None or det < best[0]):
            best = (det, idx, hist)
    if best is None:
        raise NumericalError("all MCD candidates were degenerate")
    det, idx, hist = best
    mu, cov = _mean_cov(X[idx])
    factor = consistency_factor(h, n, d)
    support = np.zeros(n, dtype=bool)
    support[idx] = True
    return McdResult(mu, cov * factor, h, float(np.linalg.det(cov)), factor, support, tuple(hist))


def reweight(points, raw, quantile=REWEIGHT_QUANTILE):
    """One-step reweighting: refit on points within the ``quantile`` distance cutoff.

    Returns ``raw`` unchanged when it was fitted on all points (h = n).
    """
    X = _as_points(points)
    n, d = X.shape
    if raw.h >= n:
        return raw
    d2 = _mahalanobis_sq(X, raw.location, raw.scatter)
    keep = d2 <= stats.chi2.ppf(quantile, d)
    if keep.sum() <= d:
        return raw
    mu, cov = _mean_cov(X[keep])
    factor = quantile / stats.chi2.cdf(stats.chi2.ppf(quantile, d), d + 2)
    return McdResult(mu, cov * factor, int(keep.sum()), float(np.linalg.det(cov)), factor, keep,
                     raw.det_history)


def subset_size(n, d, h_fraction):
    return int(min(n, max(min_subset_size(n, d), math.ceil(h_fraction * n))))


class MinCovDet(BaseEstimator):
    """Robust location/scatter estimator with an sklearn-style interface.

    Parameters
    ----------
    h_fraction : float
        Fraction of points in the concentration subset.
    reweight : bool
        Apply the one-step reweighting after the raw estimate.
    n_starts : int
        Random starts for the concentration search.
    random_state : int
    """

    def __init__(self, h_fraction=0.75, reweight=True, n_starts=500, random_state=0):
        self.h_fraction = h_fraction
        self.reweight = reweight
        self.n_starts = n_starts
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(np.asarray(X, dtype=float).reshape(len(X), -1))
        n, d = X.shape
        if not 0.5 <= self.h_fraction <= 1.0:
            raise ValueError("h_fraction must lie in [0.5, 1]")
        h = subset_size(n, d, self.h_fraction)
        raw = fast_mcd(X, h, seed=self.random_state, n_starts=self.n_starts)
        final = reweight(X, raw) if self.reweight else raw
        self.h_ = h
        self.raw_location_ = raw.location
        self.raw_covariance_ = raw.scatter
        self.raw_support_ = raw.support
        self.consistency_factor_ = raw.consistency_factor
        self.location_ = final.location
        self.covariance_ = final.scatter
        self.support_ = final.support
        self.n_features_in_ = d
        return self

    def mahalanobis(self, X):
        check_is_fitted(self, "location_")
        X = check_array(np.asarray(X, dtype=float).reshape(len(X), -1))
        return _mahalanobis_sq(X, self.location_, self.covariance_)
