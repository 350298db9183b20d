from __future__ import annotations

from typing import Any, Dict

from jsonschema import Draft7Validator

ENTITY_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "required": ["start", "end", "label"],
    "additionalProperties": False,
    "properties": {
        "start": {"type": "integer", "minimum": 0},
        "end": {"type": "integer", "minimum": 0, "description": "Inclusive end token index"},
        "label": {"type": "string", "minLength": 1},
        "score": {
            "type": "number",
            "description": "Decoder confidence; present on prediction files only"
        }
    }
}

SENTENCE_SCHEMA: Dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "spanprop corpus record",
    "type": "object",
    "required": ["tokens"],
    "additionalProperties": False,
    "properties": {
        "tokens": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "string", "minLength": 1}
        },
        "entities": {"type": "array", "items": ENTITY_SCHEMA}
    }
}

SYNTH_CONFIG_SCHEMA: Dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "spanprop synthetic corpus config",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "sentences": {"type": "integer", "minimum": 1},
        "min_len": {"type": "integer", "minimum": 1},
        "max_len": {"type": "integer", "minimum": 1},
        "categories": {"type": "integer", "minimum": 1, "maximum": 26},
        "nesting_prob": {"type": "number", "minimum": 0, "maximum": 1},
        "max_depth": {"type": "integer", "minimum": 1},
        "entity_lengths": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "integer", "minimum": 1}
        },
        "min_entities": {"type": "integer", "minimum": 0},
        "max_entities": {"type": "integer", "minimum": 0},
        "context_vocab": {"type": "integer", "minimum": 1},
        "trigger_vocab": {"type": "integer", "minimum": 1},
        "split": {
            "type": "array",
            "minItems": 3,
            "maxItems": 3,
            "items": {"type": "number", "minimum": 0}
        }
    }
}


def sentence_validator() -> Draft7Validator:
    Draft7Validator.check_schema(SENTENCE_SCHEMA)
    return Draft7Validator(SENTENCE_SCHEMA)


def synth_config_validator() -> Draft7Validator:
    Draft7Validator.check_schema(SYNTH_CONFIG_SCHEMA)
    return Draft7Validator(SYNTH_CONFIG_SCHEMA)

