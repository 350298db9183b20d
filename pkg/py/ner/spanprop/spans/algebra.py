from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Tuple

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Span:
    """Token interval with inclusive start and end indices."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 0:
            raise ValueError(f"Invalid span ({self.start}, {self.end}): start must be >= 0")
        if self.start > self.end:
            raise ValueError(f"Invalid span ({self.start}, {self.end}): start must be <= end")

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def within(self, sentence_len: int) -> bool:
        return self.end <= sentence_len - 1

    def contains(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end


@dataclass(frozen=True)
class Offsets:
    """Real-valued left/right boundary shifts, in tokens."""

    left: float
    right: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.left) and math.isfinite(self.right)):
            raise ValueError(f"Invalid offsets ({self.left}, {self.right}): values must be finite")


def iou(a: Span, b: Span) -> float:
    inter = min(a.end, b.end) - max(a.start, b.start) + 1
    if inter <= 0:
        return 0.0
    union = a.length + b.length - inter
    return inter / union


def offset_targets(seed: Span, gold: Span) -> Offsets:
    return Offsets(left=float(gold.start - seed.start), right=float(gold.end - seed.end))


def round_offset(t: float) -> int:
    return math.floor(t + 0.5)


def adjust_flagged(span: Span, t: Offsets, sentence_len: int) -> Tuple[Span, bool]:
    """Shift ``span`` by rounded offsets and clamp it to the sentence.

    Returns the adjusted span and whether the clamped boundaries crossed and had
    to be repaired into a single-token span at their clamped midpoint.
    """

    if sentence_len < 1:
        raise ValueError(f"sentence_len must be >= 1, got {sentence_len}")

    new_start = max(0, span.start + round_offset(t.left))
    new_end = min(sentence_len - 1, span.end + round_offset(t.right))
    if new_start <= new_end:
        return Span(new_start, new_end), False

    mid = (new_start + new_end) // 2
    mid = min(sentence_len - 1, max(0, mid))
    LOGGER.debug(
        "[spans] repaired inverted adjustment of (%d, %d) by (%.3f, %.3f) to (%d, %d)",
        span.start,
        span.end,
        t.left,
        t.right,
        mid,
        mid,
    )
    return Span(mid, mid), True


def adjust(span: Span, t: Offsets, sentence_len: int) -> Span:
    adjusted, _ = adjust_flagged(span, t, sentence_len)
    return adjusted


def overlap_ratio_continuous(pred_start: float, pred_end: float, gold: Span) -> float:
    # half-open coordinates [start, end + 1)
    d = (pred_end + 1.0, gold.end + 1.0)
    e = (pred_start, float(gold.start))
    return (min(d) - max(e)) / (max(d) - min(e))
