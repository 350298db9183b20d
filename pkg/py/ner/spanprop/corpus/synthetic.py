from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..spans import Span
from .jsonl import CorpusError, Entity, Sentence
from .schema import synth_config_validator

LOGGER = logging.getLogger(__name__)


class SynthConfigError(CorpusError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    """Shape of a generated nested-entity corpus.

    Entities of category ``c`` open with a category trigger token, close with a
    category closer token and hold context fillers or nested entities in between;
    single-token entities use a category singleton token.
    """

    sentences: int = 250
    min_len: int = 8
    max_len: int = 20
    categories: int = 3
    nesting_prob: float = 0.4
    max_depth: int = 2
    entity_lengths: Tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)
    min_entities: int = 1
    max_entities: int = 3
    context_vocab: int = 200
    trigger_vocab: int = 5
    split: Tuple[float, float, float] = (8.0, 1.0, 1.0)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["entity_lengths"] = list(self.entity_lengths)
        data["split"] = list(self.split)
        return data

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "SynthConfig":
        merged = {**cls().to_dict(), **dict(values)}
        errors = sorted(synth_config_validator().iter_errors(merged), key=lambda err: list(err.path))
        if errors:
            err = errors[0]
            where = "/".join(str(part) for part in err.path) or "config"
            raise SynthConfigError(f"Invalid synthetic config: {where}: {err.message}")
        merged["entity_lengths"] = tuple(sorted(set(merged["entity_lengths"])))
        merged["split"] = tuple(float(part) for part in merged["split"])
        config = cls(**merged)
        config.check_feasible()
        return config

    def check_feasible(self) -> None:
        if self.min_len > self.max_len:
            raise SynthConfigError(
                f"Infeasible synthetic config: min_len {self.min_len} > max_len {self.max_len}"
            )
        if self.min_entities > self.max_entities:
            raise SynthConfigError(
                f"Infeasible synthetic config: min_entities {self.min_entities} > "
                f"max_entities {self.max_entities}"
            )
        shortest = min(self.entity_lengths)
        if shortest > self.max_len:
            raise SynthConfigError(
                f"Infeasible synthetic config: entity longer than sentence "
                f"(shortest entity {shortest} > max_len {self.max_len})"
            )
        if self.nesting_prob >= 1.0 and self.max_depth > 1 and not self.nestable_lengths(
            self.max_len
        ):
            raise SynthConfigError(
                "Infeasible synthetic config: nesting_prob = 1 needs an entity length that can "
                f"hold an inner entity (>= {shortest + 2}) within max_len {self.max_len}"
            )
        if sum(self.split) <= 0:
            raise SynthConfigError("Infeasible synthetic config: split proportions sum to 0")

    def nestable_lengths(self, cap: int) -> List[int]:
        shortest = min(self.entity_lengths)
        return [length for length in self.entity_lengths if shortest + 2 <= length <= cap]

    def label_name(self, category: int) -> str:
        return f"ENT_{chr(ord('A') + category)}"


@dataclass
class _Block:
    tokens: List[str]
    entities: List[Tuple[int, int, str]] = field(default_factory=list)


class _Generator:
    def __init__(self, config: SynthConfig, rng: np.random.Generator) -> None:
        self.config = config
        self.rng = rng

    def _word(self) -> str:
        return f"w{int(self.rng.integers(self.config.context_vocab))}"

    def _cue(self, category: int, kind: str) -> str:
        letter = chr(ord("a") + category)
        return f"{letter}_{kind}{int(self.rng.integers(self.config.trigger_vocab))}"

    def entity(self, level: int, cap: int) -> Optional[_Block]:
        config = self.config
        nest = level < config.max_depth and float(self.rng.random()) < config.nesting_prob
        choices = config.nestable_lengths(cap) if nest else []
        if nest and not choices and config.nesting_prob >= 1.0:
            # certain nesting: no room left for an entity that can hold another
            return None
        if not choices:
            nest = False
            choices = [length for length in config.entity_lengths if length <= cap]
        if not choices:
            return None

        length = int(choices[int(self.rng.integers(len(choices)))])
        category = int(self.rng.integers(config.categories))
        label = config.label_name(category)

        if length == 1:
            return _Block(tokens=[self._cue(category, "solo")], entities=[(0, 0, label)])

        interior = [self._word() for _ in range(length - 2)]
        inner_entities: List[Tuple[int, int, str]] = []
        if nest:
            inner = self.entity(level + 1, length - 2)
            if inner is not None:
                slack = length - 2 - len(inner.tokens)
                offset = 1 + int(self.rng.integers(slack + 1))
                interior_start = offset - 1
                interior[interior_start : interior_start + len(inner.tokens)] = inner.tokens
                inner_entities = [
                    (start + offset, end + offset, name) for start, end, name in inner.entities
                ]

        tokens = [self._cue(category, "open")] + interior + [self._cue(category, "close")]
        return _Block(tokens=tokens, entities=[(0, length - 1, label)] + inner_entities)

    def sentence(self) -> Sentence:
        config = self.config
        n = int(self.rng.integers(config.min_len, config.max_len + 1))
        count = int(self.rng.integers(config.min_entities, config.max_entities + 1))

        blocks: List[_Block] = []
        used = 0
        for _ in range(count):
            block = self.entity(level=1, cap=n - used)
            if block is None:
                break
            blocks.append(block)
            used += len(block.tokens)

        gaps = self.rng.multinomial(n - used, [1.0 / (len(blocks) + 1)] * (len(blocks) + 1))
        tokens: List[str] = []
        entities: List[Entity] = []
        for index, block in enumerate(blocks):
            tokens.extend(self._word() for _ in range(int(gaps[index])))
            base = len(tokens)
            tokens.extend(block.tokens)
            entities.extend(
                Entity(Span(start + base, end + base), name) for start, end, name in block.entities
            )
        tokens.extend(self._word() for _ in range(int(gaps[-1])))

        entities.sort(key=lambda entity: (entity.span.start, entity.span.end, entity.label))
        return Sentence(tokens=tuple(tokens), entities=tuple(entities))


def generate_synthetic(
    config: SynthConfig, seed: int, *, logger: Optional[logging.Logger] = None
) -> List[Sentence]:
    """Generate a corpus that is a pure function of ``(config, seed)``."""

    active_logger = logger or LOGGER
    config.check_feasible()
    generator = _Generator(config, np.random.default_rng(seed))
    corpus = [generator.sentence() for _ in range(config.sentences)]
    active_logger.info(
        "[corpus] generated %d synthetic sentences with %d entities (seed %d)",
        len(corpus),
        sum(len(sentence.entities) for sentence in corpus),
        seed,
    )
    return corpus


def split_corpus(
    corpus: Sequence[Sentence], proportions: Sequence[float]
) -> Tuple[List[Sentence], List[Sentence], List[Sentence]]:
    """Cut a corpus into consecutive train/dev/test parts by proportion."""

    total = float(sum(proportions))
    if total <= 0:
        raise SynthConfigError("split proportions sum to 0")
    n = len(corpus)
    train_end = int(round(n * proportions[0] / total))
    dev_end = train_end + int(round(n * proportions[1] / total))
    dev_end = min(dev_end, n)
    return list(corpus[:train_end]), list(corpus[train_end:dev_end]), list(corpus[dev_end:])
