"""Logistic model trees for ranking draft prospects."""

__version__ = "0.1.0"

from draftlmt.dataset import Dataset, FeatureSchema, load_dataset
from draftlmt.logistic import LogisticModel, fit_mle, logitboost_fit
from draftlmt.tree import ModelTree, TreeConfig, grow, prune
from draftlmt.evaluation import evaluate

__all__ = [
    "Dataset",
    "FeatureSchema",
    "LogisticModel",
    "ModelTree",
    "TreeConfig",
    "evaluate",
    "fit_mle",
    "grow",
    "load_dataset",
    "logitboost_fit",
    "prune",
]
