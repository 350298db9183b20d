from .commands import Evaluation, evaluate, predict, render_stats, stats, synth, write_report
from .config import (
    HYPERPARAMS_SCHEMA,
    ConfigError,
    HyperParams,
    RunConfig,
    load_run_config,
    load_synth_config,
    read_key_values,
    with_overrides,
)
from .train import Adam, EpochLog, NumericError, Trainer, TrainResult, clip_gradients, learning_rate, train

__all__ = [
    "Adam",
    "ConfigError",
    "EpochLog",
    "Evaluation",
    "HYPERPARAMS_SCHEMA",
    "HyperParams",
    "NumericError",
    "RunConfig",
    "TrainResult",
    "Trainer",
    "clip_gradients",
    "evaluate",
    "learning_rate",
    "load_run_config",
    "load_synth_config",
    "predict",
    "read_key_values",
    "render_stats",
    "stats",
    "synth",
    "train",
    "with_overrides",
]
