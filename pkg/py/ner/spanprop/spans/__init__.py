from .algebra import (
    Offsets,
    Span,
    adjust,
    adjust_flagged,
    iou,
    offset_targets,
    overlap_ratio_continuous,
    round_offset,
)

__all__ = [
    "Offsets",
    "Span",
    "adjust",
    "adjust_flagged",
    "iou",
    "offset_targets",
    "overlap_ratio_continuous",
    "round_offset",
]
