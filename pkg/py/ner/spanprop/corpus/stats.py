from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, Sequence

from .jsonl import Sentence


@dataclass
class CorpusStats:
    sentences: int
    nested_sentences: int
    avg_length: float
    entities: int
    nested_entities: int
    nesting_ratio: float
    length_histogram: Dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sentences": self.sentences,
            "nested_sentences": self.nested_sentences,
            "avg_length": self.avg_length,
            "entities": self.entities,
            "nested_entities": self.nested_entities,
            "nesting_ratio": self.nesting_ratio,
            "length_histogram": {str(key): value for key, value in self.length_histogram.items()},
        }


def _nested_count(sentence: Sentence) -> int:
    nested = 0
    for entity in sentence.entities:
        for other in sentence.entities:
            if other is entity or other.span == entity.span:
                continue
            if entity.span.contains(other.span) or other.span.contains(entity.span):
                nested += 1
                break
    return nested


def corpus_stats(corpus: Sequence[Sentence]) -> CorpusStats:
    """Dataset statistics: sizes, nesting and entity-length distribution."""

    nested_sentences = 0
    nested_entities = 0
    entities = 0
    lengths: Counter[int] = Counter()
    for sentence in corpus:
        count = _nested_count(sentence)
        nested_entities += count
        nested_sentences += 1 if count else 0
        entities += len(sentence.entities)
        lengths.update(entity.span.length for entity in sentence.entities)

    return CorpusStats(
        sentences=len(corpus),
        nested_sentences=nested_sentences,
        avg_length=(sum(len(sentence) for sentence in corpus) / len(corpus)) if corpus else 0.0,
        entities=entities,
        nested_entities=nested_entities,
        nesting_ratio=(nested_entities / entities) if entities else 0.0,
        length_histogram=dict(sorted(lengths.items())),
    )
