from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..neural import autograd as ag
from ..neural.autograd import Tensor, TensorLike

EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    filter: float = 1.0
    regressor: float = 0.1
    classifier: float = 1.0

    def __post_init__(self) -> None:
        values = (self.filter, self.regressor, self.classifier)
        if any(value < 0 or not math.isfinite(value) for value in values):
            raise ValueError(f"loss weights must be finite and >= 0, got {values}")
        if not any(values):
            raise ValueError("loss weights must not all be zero")


@dataclass(frozen=True)
class FocalParams:
    gamma: float = 2.0

    def __post_init__(self) -> None:
        if self.gamma < 0 or not math.isfinite(self.gamma):
            raise ValueError(f"focal gamma must be finite and >= 0, got {self.gamma}")


def filter_loss(
    probs: Tensor, positive: np.ndarray, weights: np.ndarray, focal: FocalParams
) -> Tensor:
    """Weighted focal loss over filter probabilities, summed over examples."""

    positive = np.asarray(positive, dtype=bool)
    weights = np.asarray(weights, dtype=np.float64)
    p = ag.clip(probs, EPS, 1.0 - EPS)
    q = ag.sub(1.0, p)
    positive_term = ag.mul(
        ag.mul(ag.power(q, focal.gamma), ag.log(p)), -(weights * positive)
    )
    negative_term = ag.mul(
        ag.mul(ag.power(p, focal.gamma), ag.log(q)), -(weights * ~positive)
    )
    return ag.total(ag.add(positive_term, negative_term))


def smooth_l1(pred: float, target: float) -> float:
    return ag.smooth_l1(Tensor(pred), np.asarray(target, dtype=np.float64)).item()


def regression_loss(
    offsets: Tensor,
    targets: np.ndarray,
    seed_starts: np.ndarray,
    seed_ends: np.ndarray,
    gold_starts: np.ndarray,
    gold_ends: np.ndarray,
) -> Tensor:
    """Boundary smooth-L1 plus span overlap loss over stage-one positives.

    The overlap term uses the continuous shifted boundaries in half-open
    coordinates so it stays differentiable in the offsets.
    """

    count = offsets.shape[0]
    if count == 0:
        return Tensor(0.0)

    targets = np.asarray(targets, dtype=np.float64)
    boundary = ag.total(ag.smooth_l1(offsets, targets))

    left = ag.reshape(ag.col_slice(offsets, 0, 1), (count,))
    right = ag.reshape(ag.col_slice(offsets, 1, 2), (count,))
    pred_start = ag.add(left, np.asarray(seed_starts, dtype=np.float64))
    pred_stop = ag.add(right, np.asarray(seed_ends, dtype=np.float64) + 1.0)
    gold_start = np.asarray(gold_starts, dtype=np.float64)
    gold_stop = np.asarray(gold_ends, dtype=np.float64) + 1.0

    inner = ag.sub(ag.minimum(pred_stop, gold_stop), ag.maximum(pred_start, gold_start))
    outer = ag.sub(ag.maximum(pred_stop, gold_stop), ag.minimum(pred_start, gold_start))
    overlap = ag.total(ag.sub(1.0, ag.div(inner, outer)))
    return ag.add(boundary, overlap)


def classifier_loss(probs: Tensor, labels: np.ndarray, weights: np.ndarray) -> Tensor:
    chosen = ag.clip(ag.pick(probs, labels), EPS, 1.0)
    return ag.total(ag.mul(ag.log(chosen), -np.asarray(weights, dtype=np.float64)))


def total_loss(
    filter_term: TensorLike,
    regression_term: TensorLike,
    classifier_term: TensorLike,
    weights: LossWeights,
) -> Tensor:
    return ag.add(
        ag.add(ag.mul(filter_term, weights.filter), ag.mul(regression_term, weights.regressor)),
        ag.mul(classifier_term, weights.classifier),
    )
