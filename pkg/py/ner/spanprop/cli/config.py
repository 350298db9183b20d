from __future__ import annotations

import logging
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from jsonschema import Draft7Validator

from ..corpus import SynthConfig
from ..decoder import DecodeSettings, NmsParams
from ..objective import FocalParams, LossWeights
from ..targets import WindowSet

LOGGER = logging.getLogger(__name__)

PATH_KEYS = ("train", "dev", "test", "corpus", "checkpoint")

_LIST_SPLIT = re.compile(r"[,:\s]+")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class HyperParams:
    """Every tunable of a training/decoding run."""

    windows: Tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 9, 11, 13, 15)
    positive_iou: float = 0.7
    classifier_iou: float = 1.0
    soft_focus: float = 1.0
    focal_gamma: float = 2.0
    nms_decay: float = 0.9
    nms_iou: float = 0.6
    score_threshold: float = 0.55
    loss_weights: Tuple[float, float, float] = (1.0, 0.1, 1.0)
    negative_ratio: int = 5
    lr: float = 2e-3
    warmup: float = 0.1
    epochs: int = 35
    batch_size: int = 8
    dropout: float = 0.5
    grad_clip: float = 5.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    word_dim: int = 32
    char_dim: int = 16
    hidden_dim: int = 64
    min_count: int = 1
    seed: int = 13
    keep_threshold: float = 0.5
    use_filter: bool = True
    use_regressor: bool = True
    soft_examples: bool = True
    use_soft_nms: bool = True

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["windows"] = list(self.windows)
        data["loss_weights"] = list(self.loss_weights)
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "HyperParams":
        return resolve_hyperparams(data)

    @property
    def window_set(self) -> WindowSet:
        return WindowSet.of(self.windows)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(*self.loss_weights)

    @property
    def focal(self) -> FocalParams:
        return FocalParams(self.focal_gamma)

    @property
    def effective_focus(self) -> float:
        return self.soft_focus if self.soft_examples else 0.0

    def decode_settings(self) -> DecodeSettings:
        return DecodeSettings(
            windows=self.window_set,
            keep_threshold=self.keep_threshold,
            nms=NmsParams(self.nms_decay, self.nms_iou, self.score_threshold),
            use_filter=self.use_filter,
            use_regressor=self.use_regressor,
            use_soft_nms=self.use_soft_nms,
        )


_PROBABILITY = {"type": "number", "exclusiveMinimum": 0, "maximum": 1}

HYPERPARAMS_SCHEMA: Dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "spanprop hyperparameters",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "windows": {
            "type": "array",
            "minItems": 1,
            "uniqueItems": True,
            "items": {"type": "integer", "minimum": 1}
        },
        "positive_iou": _PROBABILITY,
        "classifier_iou": _PROBABILITY,
        "soft_focus": {"type": "number", "minimum": 0},
        "focal_gamma": {"type": "number", "minimum": 0},
        "nms_decay": _PROBABILITY,
        "nms_iou": _PROBABILITY,
        "score_threshold": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "loss_weights": {
            "type": "array",
            "minItems": 3,
            "maxItems": 3,
            "items": {"type": "number", "minimum": 0}
        },
        "negative_ratio": {"type": "integer", "minimum": 1},
        "lr": {"type": "number", "exclusiveMinimum": 0},
        "warmup": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "epochs": {"type": "integer", "minimum": 1},
        "batch_size": {"type": "integer", "minimum": 1},
        "dropout": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "grad_clip": {"type": "number", "minimum": 0},
        "adam_beta1": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "adam_beta2": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "adam_eps": {"type": "number", "exclusiveMinimum": 0},
        "word_dim": {"type": "integer", "minimum": 1},
        "char_dim": {"type": "integer", "minimum": 2, "multipleOf": 2},
        "hidden_dim": {"type": "integer", "minimum": 2, "multipleOf": 2},
        "min_count": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "keep_threshold": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "use_filter": {"type": "boolean"},
        "use_regressor": {"type": "boolean"},
        "soft_examples": {"type": "boolean"},
        "use_soft_nms": {"type": "boolean"}
    }
}


@dataclass
class RunConfig:
    hyperparams: HyperParams = field(default_factory=HyperParams)
    paths: Dict[str, Path] = field(default_factory=dict)


def read_key_values(path: Path) -> Dict[str, Tuple[str, int]]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""

    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file does not exist: {path}")
    values: Dict[str, Tuple[str, int]] = {}
    with path.open("rb") as handle:
        for line_no, raw_bytes in enumerate(handle, start=1):
            try:
                raw = raw_bytes.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ConfigError(
                    f"Invalid config {path}: line {line_no}: not valid UTF-8 at byte {exc.start}"
                ) from exc
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"Invalid config {path}: line {line_no}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigError(f"Invalid config {path}: line {line_no}: missing key")
            if key in values:
                raise ConfigError(
                    f"Invalid config {path}: line {line_no}: duplicate key '{key}' "
                    f"(first set on line {values[key][1]})"
                )
            values[key] = (value, line_no)
    return values


def _parse_int_list(text: str) -> List[int]:
    items: List[int] = []
    for part in _LIST_SPLIT.split(text.strip().strip("[]()").strip()):
        if not part:
            continue
        if "-" in part:
            low, high = (int(bound) for bound in part.split("-", 1))
            if low > high:
                raise ValueError(f"empty range '{part}'")
            items.extend(range(low, high + 1))
        else:
            items.append(int(part))
    return items


def _parse_float_list(text: str) -> List[float]:
    return [
        float(part) for part in _LIST_SPLIT.split(text.strip().strip("[]()").strip()) if part
    ]


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got '{text}'")


def coerce_value(default: Any, text: str) -> Any:
    """Parse ``text`` into the type of ``default``."""

    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, (list, tuple)):
        if default and isinstance(default[0], int):
            return _parse_int_list(text)
        return _parse_float_list(text)
    return text


def _coerce_all(
    defaults: Mapping[str, Any],
    raw: Mapping[str, Tuple[str, Optional[int]]],
    source: str,
) -> Dict[str, Any]:
    parsed: Dict[str, Any] = {}
    for key, (text, line) in raw.items():
        where = f"{source}: line {line}" if line is not None else source
        if key not in defaults:
            raise ConfigError(f"Invalid config {where}: unknown key '{key}'")
        try:
            parsed[key] = coerce_value(defaults[key], text)
        except ValueError as exc:
            raise ConfigError(f"Invalid config {where}: {key}: {exc}") from exc
    return parsed


def parse_overrides(pairs: Sequence[str]) -> Dict[str, Tuple[str, Optional[int]]]:
    overrides: Dict[str, Tuple[str, Optional[int]]] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"Invalid override '{pair}': expected key=value")
        key, value = (part.strip() for part in pair.split("=", 1))
        overrides[key] = (value, None)
    return overrides


def resolve_hyperparams(values: Mapping[str, Any]) -> HyperParams:
    merged = {**HyperParams().to_dict(), **dict(values)}
    Draft7Validator.check_schema(HYPERPARAMS_SCHEMA)
    errors = sorted(Draft7Validator(HYPERPARAMS_SCHEMA).iter_errors(merged), key=lambda e: list(e.path))
    if errors:
        where = "/".join(str(part) for part in errors[0].path) or "hyperparams"
        raise ConfigError(f"Invalid hyperparameters: {where}: {errors[0].message}")

    merged["windows"] = tuple(sorted(merged["windows"]))
    merged["loss_weights"] = tuple(float(value) for value in merged["loss_weights"])
    hyperparams = HyperParams(**merged)
    try:
        hyperparams.weights
    except ValueError as exc:
        raise ConfigError(f"Invalid hyperparameters: loss_weights: {exc}") from exc
    return hyperparams


def load_run_config(
    path: Optional[Path],
    overrides: Sequence[str] = (),
    *,
    seed: Optional[int] = None,
    base: Optional[HyperParams] = None,
    logger: Optional[logging.Logger] = None,
) -> RunConfig:
    """Defaults (or ``base``) < config file < ``key=value`` overrides < ``seed`` flag."""

    active_logger = logger or LOGGER
    defaults = (base or HyperParams()).to_dict()
    raw: Dict[str, Tuple[str, Optional[int]]] = {}
    source = "flags"
    if path is not None:
        raw.update(read_key_values(path))
        source = str(path)

    paths = {key: Path(raw.pop(key)[0]) for key in PATH_KEYS if key in raw}
    values = _coerce_all(defaults, raw, source)

    flag_raw = parse_overrides(overrides)
    for key in PATH_KEYS:
        if key in flag_raw:
            paths[key] = Path(flag_raw.pop(key)[0])
    values.update(_coerce_all(defaults, flag_raw, "--set"))
    if seed is not None:
        values["seed"] = seed

    hyperparams = resolve_hyperparams({**defaults, **values})
    active_logger.debug("[config] resolved hyperparameters: %s", hyperparams.to_dict())
    return RunConfig(hyperparams=hyperparams, paths=paths)


def with_overrides(hyperparams: HyperParams, overrides: Sequence[str]) -> HyperParams:
    """Apply ``key=value`` flags on top of stored hyperparameters."""

    return load_run_config(None, overrides, base=hyperparams).hyperparams


def load_synth_config(
    path: Optional[Path], overrides: Sequence[str] = ()
) -> Tuple[SynthConfig, int]:
    """Synthetic corpus config plus the ``seed`` key from the same file (default 0)."""

    defaults: Dict[str, Any] = {**SynthConfig().to_dict(), "seed": 0}
    defaults["entity_lengths"] = tuple(defaults["entity_lengths"])
    defaults["split"] = tuple(defaults["split"])
    raw: Dict[str, Tuple[str, Optional[int]]] = {}
    source = "flags"
    if path is not None:
        raw.update(read_key_values(path))
        source = str(path)
    values = _coerce_all(defaults, raw, source)
    values.update(_coerce_all(defaults, parse_overrides(overrides), "--set"))
    seed = values.pop("seed", 0)
    return SynthConfig.from_mapping(values), seed


__all__ = [
    "ConfigError",
    "HYPERPARAMS_SCHEMA",
    "HyperParams",
    "PATH_KEYS",
    "RunConfig",
    "coerce_value",
    "load_run_config",
    "load_synth_config",
    "read_key_values",
    "resolve_hyperparams",
    "with_overrides",
]
