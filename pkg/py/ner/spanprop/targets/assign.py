from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..corpus import Entity
from ..spans import Offsets, Span, iou, offset_targets


@dataclass(frozen=True)
class WindowSet:
    """Enumerated seed-span lengths; the largest one is the window limit."""

    lengths: Tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.lengths:
            raise ValueError("WindowSet needs at least one length")
        if any(length < 1 for length in self.lengths):
            raise ValueError(f"WindowSet lengths must be >= 1, got {list(self.lengths)}")
        if any(b <= a for a, b in zip(self.lengths, self.lengths[1:])):
            raise ValueError(f"WindowSet lengths must be strictly increasing, got {list(self.lengths)}")

    @classmethod
    def of(cls, lengths: Iterable[int]) -> "WindowSet":
        return cls(tuple(sorted(set(int(length) for length in lengths))))

    @property
    def max_length(self) -> int:
        return self.lengths[-1]

    def __contains__(self, length: object) -> bool:
        return length in self.lengths


@dataclass(frozen=True)
class SpanTarget:
    span: Span
    paired_gold: Optional[Entity]
    iou: float
    is_positive: bool
    offsets: Optional[Offsets]
    class_label: int
    weight: float


def enumerate_seeds(sentence_len: int, windows: WindowSet) -> List[Span]:
    if sentence_len < 1:
        raise ValueError(f"sentence_len must be >= 1, got {sentence_len}")
    return [
        Span(start, start + length - 1)
        for length in windows.lengths
        for start in range(sentence_len - length + 1)
    ]


def pair_with_gold(span: Span, entities: Sequence[Entity]) -> Tuple[Optional[Entity], float]:
    """Gold entity with the largest IoU; ties go to the shorter, then earlier entity."""

    best: Optional[Entity] = None
    best_key: Optional[Tuple[float, int, int, str]] = None
    for entity in entities:
        overlap = iou(span, entity.span)
        key = (-overlap, entity.span.length, entity.span.start, entity.label)
        if best_key is None or key < best_key:
            best, best_key = entity, key
    if best is None or best_key is None:
        return None, 0.0
    return best, -best_key[0]


def soft_weight(overlap: float, alpha: float, eta: float) -> float:
    if overlap >= alpha:
        return overlap**eta
    return (1.0 - overlap) ** eta


def assign_stage1(
    span: Span,
    entities: Sequence[Entity],
    alpha1: float,
    eta: float,
    label_ids: Mapping[str, int],
) -> SpanTarget:
    gold, overlap = pair_with_gold(span, entities)
    positive = gold is not None and overlap >= alpha1
    return SpanTarget(
        span=span,
        paired_gold=gold,
        iou=overlap,
        is_positive=positive,
        offsets=offset_targets(span, gold.span) if positive and gold is not None else None,
        class_label=label_ids[gold.label] if positive and gold is not None else 0,
        weight=soft_weight(overlap, alpha1, eta),
    )


def assign_stage2(
    adjusted: Span,
    paired_gold: Optional[Entity],
    alpha2: float,
    eta: float,
    label_ids: Mapping[str, int],
) -> Tuple[int, float]:
    """Relabel an adjusted proposal against its stage-one partner."""

    if paired_gold is None:
        return 0, 1.0
    overlap = iou(adjusted, paired_gold.span)
    label = label_ids[paired_gold.label] if overlap >= alpha2 else 0
    return label, soft_weight(overlap, alpha2, eta)


def build_targets(
    sentence_len: int,
    entities: Sequence[Entity],
    windows: WindowSet,
    alpha1: float,
    eta: float,
    label_ids: Mapping[str, int],
) -> List[SpanTarget]:
    return [
        assign_stage1(span, entities, alpha1, eta, label_ids)
        for span in enumerate_seeds(sentence_len, windows)
    ]


def downsample_negatives(
    targets: Sequence[SpanTarget], ratio: int, rng: np.random.Generator
) -> List[SpanTarget]:
    """Keep every positive and at most ``ratio`` negatives per positive.

    Sentences without positives keep ``ratio`` negatives. Survivors keep their
    original order.
    """

    if ratio < 1:
        raise ValueError(f"ratio must be >= 1, got {ratio}")
    positives = [index for index, target in enumerate(targets) if target.is_positive]
    negatives = [index for index, target in enumerate(targets) if not target.is_positive]
    cap = ratio * len(positives) if positives else ratio
    if len(negatives) > cap:
        chosen = rng.choice(len(negatives), size=cap, replace=False)
        negatives = [negatives[int(index)] for index in np.sort(chosen)]
    keep = sorted(positives + negatives)
    return [targets[index] for index in keep]
