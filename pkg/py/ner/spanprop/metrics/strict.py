from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Sequence, Set, Tuple

from ..corpus import Sentence

EntityKey = Tuple[int, int, int, str]


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        predicted = self.tp + self.fp
        return self.tp / predicted if predicted else 0.0

    @property
    def recall(self) -> float:
        gold = self.tp + self.fn
        return self.tp / gold if gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    @property
    def support(self) -> int:
        return self.tp + self.fn

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_dict(self) -> Dict[str, float]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


def entity_keys(corpus: Sequence[Sentence]) -> Set[EntityKey]:
    return {
        (index, entity.span.start, entity.span.end, entity.label)
        for index, sentence in enumerate(corpus)
        for entity in sentence.entities
    }


def _check_aligned(predicted: Sequence[Sentence], gold: Sequence[Sentence]) -> None:
    if len(predicted) != len(gold):
        raise ValueError(
            f"predicted and gold corpora differ in size: {len(predicted)} != {len(gold)}"
        )


def count_matches(predicted: Iterable[EntityKey], gold: Iterable[EntityKey]) -> Counts:
    predicted_set, gold_set = set(predicted), set(gold)
    tp = len(predicted_set & gold_set)
    return Counts(tp=tp, fp=len(predicted_set) - tp, fn=len(gold_set) - tp)


def strict_counts(predicted: Sequence[Sentence], gold: Sequence[Sentence]) -> Counts:
    _check_aligned(predicted, gold)
    return count_matches(entity_keys(predicted), entity_keys(gold))


def strict_f1(
    predicted: Sequence[Sentence], gold: Sequence[Sentence]
) -> Tuple[float, float, float]:
    """Exact (start, end, label) matching precision, recall and F1."""

    counts = strict_counts(predicted, gold)
    return counts.precision, counts.recall, counts.f1
