"""Confusion matrices and permutation feature importance."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    classes: tuple
    counts: np.ndarray  # rows: true class, columns: predicted class

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def accuracy(self):
        return float(np.trace(self.counts) / self.total) if self.total else float("nan")

    def recall(self):
        rows = self.counts.sum(axis=1)
        with np.errstate(all="ignore"):
            return np.where(rows > 0, np.diag(self.counts) / rows, np.nan)

    def precision(self):
        cols = self.counts.sum(axis=0)
        with np.errstate(all="ignore"):
            return np.where(cols > 0, np.diag(self.counts) / cols, np.nan)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["true\\predicted"] + list(self.classes))
            for c, row in zip(self.classes, self.counts):
                w.writerow([c] + [int(v) for v in row])


def confusion(y_true, y_pred, classes=None):
    """Count matrix of true (rows) against predicted (columns) labels."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"label arrays differ in length: {len(y_true)} vs {len(y_pred)}")
    if classes is None:
        classes = np.unique(np.concatenate([y_true, y_pred]))
    classes = tuple(classes)
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        if t not in index or p not in index:
            raise ValueError(f"label outside class list: {t if t not in index else p}")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(classes, counts)


@dataclass(frozen=True)
class ImportanceReport:
    """Per-feature mean accuracy drop, sorted descending."""

    names: tuple
    importance: np.ndarray
    std: np.ndarray
    baseline_accuracy: float

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["feature", "importance", "std"])
            for n, m, s in zip(self.names, self.importance, self.std):
                w.writerow([n, repr(float(m)), repr(float(s))])


def permutation_importance(model, X, y, n_repeats=10, seed=0, feature_names=None):
    """Mean drop in accuracy when one feature column is shuffled.

    Each feature gets its own random stream derived from ``seed``, so the
    report does not depend on evaluation order.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValueError("permutation importance needs a non-empty test set")
    names = feature_names if feature_names is not None else [f"f{j}" for j in range(X.shape[1])]
    base = float(np.mean(model.predict(X) == y))
    streams = np.random.SeedSequence(seed).spawn(X.shape[1])
    means, stds = [], []
    for j in range(X.shape[1]):
        rng = np.random.default_rng(streams[j])
        drops = []
        for _ in range(n_repeats):
            Xp = X.copy()
            Xp[:, j] = X[rng.permutation(X.shape[0]), j]
            drops.append(base - float(np.mean(model.predict(Xp) == y)))
        means.append(np.mean(drops))
        stds.append(np.std(drops))
    means, stds = np.array(means), np.array(stds)
    order = sorted(range(len(means)), key=lambda j: (-means[j], j))
    return ImportanceReport(
        tuple(names[j] for j in order), means[order], stds[order], base
    )
