from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Sequence

from .jsonl import CorpusError, Sentence

UNK = "<unk>"
BOS = "<s>"
EOS = "</s>"
NONE_LABEL = "None"


@dataclass
class Vocab:
    """Dense id maps for tokens, characters and entity labels.

    Token ids 0-2 are reserved for the unknown token and the two boundary
    sentinels; char id 0 is the unknown char; label id 0 is the None class.
    """

    tokens: Dict[str, int]
    chars: Dict[str, int]
    labels: List[str]

    @property
    def num_labels(self) -> int:
        """Number of entity categories C (excluding None)."""

        return len(self.labels) - 1

    def token_id(self, token: str) -> int:
        return self.tokens.get(token, self.tokens[UNK])

    def char_ids(self, token: str) -> List[int]:
        unk = self.chars[UNK]
        return [self.chars.get(char, unk) for char in token]

    def label_ids(self) -> Dict[str, int]:
        return {name: index for index, name in enumerate(self.labels)}

    def missing_labels(self, corpus: Iterable[Sentence]) -> List[str]:
        known = set(self.labels[1:])
        found = {entity.label for sentence in corpus for entity in sentence.entities}
        return sorted(found - known)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tokens": sorted(self.tokens, key=self.tokens.__getitem__),
            "chars": sorted(self.chars, key=self.chars.__getitem__),
            "labels": list(self.labels),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Vocab":
        return cls(
            tokens={token: index for index, token in enumerate(data["tokens"])},
            chars={char: index for index, char in enumerate(data["chars"])},
            labels=list(data["labels"]),
        )


def build_vocab(corpus: Sequence[Sentence], min_count: int = 1) -> Vocab:
    if not corpus:
        raise CorpusError("Cannot build a vocabulary from an empty corpus")

    token_counts: Counter[str] = Counter()
    char_set = set()
    label_set = set()
    for sentence in corpus:
        token_counts.update(sentence.tokens)
        for token in sentence.tokens:
            char_set.update(token)
        label_set.update(entity.label for entity in sentence.entities)

    tokens: Dict[str, int] = {UNK: 0, BOS: 1, EOS: 2}
    for token in sorted(token_counts):
        if token_counts[token] >= min_count and token not in tokens:
            tokens[token] = len(tokens)

    chars: Dict[str, int] = {UNK: 0}
    for char in sorted(char_set):
        chars[char] = len(chars)

    if NONE_LABEL in label_set:
        raise CorpusError(f"Entity label '{NONE_LABEL}' is reserved for non-entity spans")

    labels = [NONE_LABEL] + sorted(label_set)
    return Vocab(tokens=tokens, chars=chars, labels=labels)
