from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from ..spans import Span
from .schema import sentence_validator

LOGGER = logging.getLogger(__name__)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Entity:
    span: Span
    label: str


@dataclass(frozen=True)
class Sentence:
    """Pre-tokenized sentence with (possibly nested) gold entities."""

    tokens: Tuple[str, ...]
    entities: Tuple[Entity, ...] = ()
    line: Optional[int] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        where = f"line {self.line}" if self.line is not None else "sentence"
        if not self.tokens:
            raise CorpusError(f"{where}: sentence has no tokens")
        if not all(self.tokens):
            raise CorpusError(f"{where}: empty token")
        seen = set()
        for entity in self.entities:
            if not entity.span.within(len(self.tokens)):
                raise CorpusError(
                    f"span out of range, {where}: ({entity.span.start}, {entity.span.end}) "
                    f"for {len(self.tokens)} tokens"
                )
            key = (entity.span, entity.label)
            if key in seen:
                raise CorpusError(
                    f"duplicate entity, {where}: ({entity.span.start}, {entity.span.end}) "
                    f"{entity.label}"
                )
            seen.add(key)

    def __len__(self) -> int:
        return len(self.tokens)


def sentence_to_record(
    sentence: Sentence, scores: Optional[Sequence[float]] = None
) -> Dict[str, Any]:
    entities: List[Dict[str, Any]] = []
    for index, entity in enumerate(sentence.entities):
        record: Dict[str, Any] = {
            "start": entity.span.start,
            "end": entity.span.end,
            "label": entity.label,
        }
        if scores is not None:
            record["score"] = scores[index]
        entities.append(record)
    return {"tokens": list(sentence.tokens), "entities": entities}


def _parse_record(data: Any, line: int, path: Path) -> Sentence:
    errors = sorted(sentence_validator().iter_errors(data), key=lambda err: list(err.path))
    if errors:
        err = errors[0]
        where = "/".join(str(part) for part in err.path) or "record"
        raise CorpusError(f"Invalid corpus {path}: line {line}: {where}: {err.message}")

    tokens = tuple(data["tokens"])
    entities: List[Entity] = []
    for raw in data.get("entities", []):
        start, end = raw["start"], raw["end"]
        if start > end or end >= len(tokens):
            raise CorpusError(
                f"Invalid corpus {path}: span out of range, line {line}: ({start}, {end}) "
                f"for {len(tokens)} tokens"
            )
        entities.append(Entity(Span(start, end), raw["label"]))

    try:
        return Sentence(tokens=tokens, entities=tuple(entities), line=line)
    except CorpusError as exc:
        raise CorpusError(f"Invalid corpus {path}: {exc}") from exc


def read_jsonl(path: Path, *, logger: Optional[logging.Logger] = None) -> List[Sentence]:
    active_logger = logger or LOGGER
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Corpus file does not exist: {path}")

    sentences: List[Sentence] = []
    with path.open("rb") as handle:
        for line_no, raw_bytes in enumerate(handle, start=1):
            try:
                raw_line = raw_bytes.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorpusError(
                    f"Invalid corpus {path}: line {line_no}: not valid UTF-8 at byte {exc.start}"
                ) from exc
            if not raw_line.strip():
                continue
            try:
                data = json.loads(raw_line)
            except json.JSONDecodeError as exc:
                raise CorpusError(
                    f"Invalid corpus {path}: line {line_no}: JSON decode error at column "
                    f"{exc.colno}: {exc.msg}"
                ) from exc
            sentences.append(_parse_record(data, line_no, path))

    active_logger.debug("[corpus] read %d sentences from %s", len(sentences), path)
    return sentences


def write_jsonl(
    path: Path,
    sentences: Iterable[Sentence],
    scores: Optional[Sequence[Sequence[float]]] = None,
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for index, sentence in enumerate(sentences):
            record = sentence_to_record(sentence, scores[index] if scores is not None else None)
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True))
            handle.write("\n")
