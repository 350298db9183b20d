from .assign import (
    SpanTarget,
    WindowSet,
    assign_stage1,
    assign_stage2,
    build_targets,
    downsample_negatives,
    enumerate_seeds,
    pair_with_gold,
    soft_weight,
)

__all__ = [
    "SpanTarget",
    "WindowSet",
    "assign_stage1",
    "assign_stage2",
    "build_targets",
    "downsample_negatives",
    "enumerate_seeds",
    "pair_with_gold",
    "soft_weight",
]
