"""Explainable diabetes-risk modelling: data preparation, models, SHAP/LIME
explanations and the risk-assessment engine behind the HTTP service."""

from ._core import (
    Dataset,
    Engine,
    IoError,
    Model,
    NumericError,
    ValidationError,
    anova_oneway,
    engineer,
    input_feature_names,
    prepare_csv,
    roc_auc,
    studentized_range_quantile,
    train,
    tukey_hsd,
)

__all__ = [
    "Dataset",
    "Engine",
    "IoError",
    "Model",
    "NumericError",
    "ValidationError",
    "anova_oneway",
    "engineer",
    "input_feature_names",
    "prepare_csv",
    "roc_auc",
    "studentized_range_quantile",
    "train",
    "tukey_hsd",
]
