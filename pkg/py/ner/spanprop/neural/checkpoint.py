from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import numpy as np
from jsonschema import Draft7Validator

from ..corpus import Vocab
from .model import ModelDims, SpanProposalModel

LOGGER = logging.getLogger(__name__)

CHECKPOINT_VERSION = "1.0.0"

ARRAY_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "required": ["shape", "values"],
    "additionalProperties": False,
    "properties": {
        "shape": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "values": {"type": "array", "items": {"type": "number"}}
    }
}

CHECKPOINT_SCHEMA: Dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "spanprop model checkpoint",
    "type": "object",
    "required": ["version", "dims", "hyperparams", "vocab", "params"],
    "additionalProperties": False,
    "properties": {
        "version": {"type": "string", "const": CHECKPOINT_VERSION},
        "dims": {
            "type": "object",
            "required": [
                "num_words", "num_chars", "num_classes", "word_dim", "char_dim", "hidden_dim"
            ],
            "additionalProperties": False,
            "properties": {
                "num_words": {"type": "integer", "minimum": 1},
                "num_chars": {"type": "integer", "minimum": 1},
                "num_classes": {"type": "integer", "minimum": 2},
                "word_dim": {"type": "integer", "minimum": 1},
                "char_dim": {"type": "integer", "minimum": 2},
                "hidden_dim": {"type": "integer", "minimum": 2}
            }
        },
        "hyperparams": {"type": "object"},
        "vocab": {
            "type": "object",
            "required": ["tokens", "chars", "labels"],
            "additionalProperties": False,
            "properties": {
                "tokens": {"type": "array", "items": {"type": "string"}},
                "chars": {"type": "array", "items": {"type": "string"}},
                "labels": {"type": "array", "minItems": 2, "items": {"type": "string"}}
            }
        },
        "params": {"type": "object", "additionalProperties": ARRAY_SCHEMA},
        "train_state": {"type": "object"}
    }
}


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    model: SpanProposalModel
    vocab: Vocab
    hyperparams: Dict[str, Any]
    train_state: Optional[Dict[str, Any]] = None


def pack_array(values: np.ndarray) -> Dict[str, Any]:
    return {"shape": list(values.shape), "values": values.ravel().tolist()}


def unpack_array(data: Mapping[str, Any]) -> np.ndarray:
    return np.asarray(data["values"], dtype=np.float64).reshape(tuple(data["shape"]))


def save_checkpoint(
    path: Path,
    model: SpanProposalModel,
    vocab: Vocab,
    hyperparams: Mapping[str, Any],
    train_state: Optional[Mapping[str, Any]] = None,
    *,
    logger: Optional[logging.Logger] = None,
) -> None:
    active_logger = logger or LOGGER
    document: Dict[str, Any] = {
        "version": CHECKPOINT_VERSION,
        "dims": model.dims.to_dict(),
        "hyperparams": dict(hyperparams),
        "vocab": vocab.to_dict(),
        "params": {name: pack_array(values) for name, values in model.state_dict().items()},
    }
    if train_state is not None:
        document["train_state"] = dict(train_state)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        json.dump(document, handle, sort_keys=True, separators=(",", ":"))
    active_logger.debug("[checkpoint] saved %d parameter arrays to %s", len(document["params"]), path)


def load_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint does not exist: {path}")
    try:
        with path.open("r", encoding="utf-8") as handle:
            document = json.load(handle)
    except json.JSONDecodeError as exc:
        raise CheckpointError(
            f"Invalid checkpoint {path}: JSON decode error at line {exc.lineno}, "
            f"column {exc.colno}: {exc.msg}"
        ) from exc
    except UnicodeDecodeError as exc:
        raise CheckpointError(f"Invalid checkpoint {path}: not valid UTF-8 at byte {exc.start}") from exc

    Draft7Validator.check_schema(CHECKPOINT_SCHEMA)
    errors = sorted(Draft7Validator(CHECKPOINT_SCHEMA).iter_errors(document), key=lambda e: list(e.path))
    if errors:
        where = "/".join(str(part) for part in errors[0].path) or "document"
        raise CheckpointError(f"Invalid checkpoint {path}: {where}: {errors[0].message}")

    try:
        dims = ModelDims(**document["dims"])
        model = SpanProposalModel(dims)
        model.load_state_dict(
            {name: unpack_array(data) for name, data in document["params"].items()}
        )
    except ValueError as exc:
        raise CheckpointError(f"Invalid checkpoint {path}: {exc}") from exc

    return Checkpoint(
        model=model,
        vocab=Vocab.from_dict(document["vocab"]),
        hyperparams=document["hyperparams"],
        train_state=document.get("train_state"),
    )
