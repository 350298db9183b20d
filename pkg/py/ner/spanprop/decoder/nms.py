from __future__ import annotations

from bisect import insort
from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

from ..spans import Span, iou


@dataclass(frozen=True)
class ScoredSpan:
    span: Span
    label: int
    score: float

    def __post_init__(self) -> None:
        if self.label == 0:
            raise ValueError("ScoredSpan cannot carry the None label")


@dataclass(frozen=True)
class NmsParams:
    decay: float = 0.9
    iou_threshold: float = 0.6
    score_threshold: float = 0.55

    def __post_init__(self) -> None:
        if not 0.0 < self.decay <= 1.0:
            raise ValueError(f"decay coefficient must be in (0, 1], got {self.decay}")
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError(f"IoU threshold must be in (0, 1], got {self.iou_threshold}")
        if not 0.0 <= self.score_threshold < 1.0:
            raise ValueError(f"score threshold must be in [0, 1), got {self.score_threshold}")


def _order(item: ScoredSpan) -> Tuple[float, int, int, int]:
    return (-item.score, item.span.start, item.span.end, item.label)


def decay(score: float, overlap: float, u: float, k: float) -> float:
    return score * u if overlap >= k else score


def soft_nms(spans: Sequence[ScoredSpan], params: NmsParams) -> List[ScoredSpan]:
    """Decay rather than drop spans that overlap a higher-scored span.

    Class-agnostic. The remaining list stays sorted after every decay round and
    the score threshold is applied once the loop finishes.
    """

    remaining = sorted(spans, key=_order)
    selected: List[ScoredSpan] = []
    while remaining:
        best = remaining.pop(0)
        selected.append(best)
        rest: List[ScoredSpan] = []
        for other in remaining:
            score = decay(
                other.score, iou(best.span, other.span), params.decay, params.iou_threshold
            )
            insort(rest, replace(other, score=score), key=_order)
        remaining = rest
    return [item for item in selected if item.score > params.score_threshold]


def threshold_only(spans: Sequence[ScoredSpan], params: NmsParams) -> List[ScoredSpan]:
    return [item for item in sorted(spans, key=_order) if item.score > params.score_threshold]
