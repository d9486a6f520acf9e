"""JSON round-trip of fitted classification pipelines (``model.json``)."""

from __future__ import annotations

import json

import numpy as np
from sklearn.pipeline import Pipeline

from railgnss.classify.gbt import GradientBoostedTreesClassifier, RegressionTree
from railgnss.classify.mlr import MultinomialLogisticRegression
from railgnss.classify.preprocessing import FeatureStandardizer

MODEL_FORMAT_VERSION = 1


def _floats(a):
    return [float(v) for v in np.ravel(a)]


def pipeline_to_dict(pipe):
    std, clf = pipe.named_steps["standardize"], pipe.named_steps["classifier"]
    doc = {
        "standardizer": {
            "mean": _floats(std.mean_),
            "scale": _floats(std.scale_),
            "constant": [bool(v) for v in std.constant_],
        },
        "classes": [str(c) for c in clf.classes_],
        "params": clf.get_params(),
    }
    if isinstance(clf, MultinomialLogisticRegression):
        doc["kind"] = "mlr"
        doc["weights"] = [_floats(row) for row in clf.coef_]
        doc["bias"] = _floats(clf.intercept_)
    elif isinstance(clf, GradientBoostedTreesClassifier):
        doc["kind"] = "gbt"
        doc["init_score"] = _floats(clf.init_score_)
        doc["trees"] = [[t.to_dict() for t in rnd] for rnd in clf.trees_]
        doc["train_loss"] = _floats(clf.train_loss_)
    else:
        raise TypeError(f"cannot serialize {type(clf).__name__}")
    return doc


def pipeline_from_dict(doc):
    std = FeatureStandardizer()
    std.mean_ = np.array(doc["standardizer"]["mean"])
    std.scale_ = np.array(doc["standardizer"]["scale"])
    std.constant_ = np.array(doc["standardizer"]["constant"], dtype=bool)
    std.n_features_in_ = len(std.mean_)
    classes = np.array(doc["classes"])
    if doc["kind"] == "mlr":
        clf = MultinomialLogisticRegression(**doc["params"])
        clf.coef_ = np.array(doc["weights"], dtype=float).reshape(len(classes), -1)
        clf.intercept_ = np.array(doc["bias"])
        clf.n_features_in_ = clf.coef_.shape[1]
    elif doc["kind"] == "gbt":
        clf = GradientBoostedTreesClassifier(**doc["params"])
        clf.init_score_ = np.array(doc["init_score"])
        clf.trees_ = [[RegressionTree.from_dict(t) for t in rnd] for rnd in doc["trees"]]
        clf.train_loss_ = list(doc.get("train_loss", []))
        clf.n_features_in_ = std.n_features_in_
    else:
        raise ValueError(f"unknown model kind {doc['kind']!r}")
    clf.classes_ = classes
    return Pipeline([("standardize", std), ("classifier", clf)])


def save_models(path, models, schema, config_hash=None, extra=None):
    """Write a versioned document holding one or more fitted pipelines."""
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "schema": {"hash": schema.hash, "names": list(schema.names)},
        "config_hash": config_hash,
        "models": {kind: pipeline_to_dict(p) for kind, p in sorted(models.items())},
    }
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")


def load_models(path, schema=None):
    """Read ``model.json``; raises ValueError when ``schema`` does not match."""
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')!r}")
    if schema is not None and doc["schema"]["hash"] != schema.hash:
        raise ValueError("feature schema does not match the one the model was trained on")
    return {kind: pipeline_from_dict(d) for kind, d in doc["models"].items()}, doc
