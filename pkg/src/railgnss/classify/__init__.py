"""Environment classifiers: softmax regression and boosted trees."""

from railgnss.classify.gbt import (
    GradientBoostedTreesClassifier,
    RegressionTree,
    gbt_train,
    make_gbt_pipeline,
)
from railgnss.classify.metrics import (
    ConfusionMatrix,
    ImportanceReport,
    confusion,
    permutation_importance,
)
from railgnss.classify.mlr import (
    DEFAULT_LAMBDA_GRID,
    CvReport,
    MultinomialLogisticRegression,
    make_mlr_pipeline,
    mlr_objective,
    mlr_train,
    softmax,
)
from railgnss.classify.persist import load_models, save_models
from railgnss.classify.preprocessing import FeatureStandardizer

__all__ = [
    "DEFAULT_LAMBDA_GRID",
    "ConfusionMatrix",
    "CvReport",
    "FeatureStandardizer",
    "GradientBoostedTreesClassifier",
    "ImportanceReport",
    "MultinomialLogisticRegression",
    "RegressionTree",
    "confusion",
    "gbt_train",
    "load_models",
    "make_gbt_pipeline",
    "make_mlr_pipeline",
    "mlr_objective",
    "mlr_train",
    "permutation_importance",
    "save_models",
    "softmax",
]
