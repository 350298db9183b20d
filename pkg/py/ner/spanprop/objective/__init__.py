from .losses import (
    EPS,
    FocalParams,
    LossWeights,
    classifier_loss,
    filter_loss,
    regression_loss,
    smooth_l1,
    total_loss,
)

__all__ = [
    "EPS",
    "FocalParams",
    "LossWeights",
    "classifier_loss",
    "filter_loss",
    "regression_loss",
    "smooth_l1",
    "total_loss",
]
