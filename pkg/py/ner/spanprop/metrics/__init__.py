from .report import (
    BUCKETS,
    OFFSET_BINS,
    EvalReport,
    bucket_of,
    length_report,
    offset_histogram,
    write_offset_csv,
)
from .strict import Counts, count_matches, entity_keys, strict_counts, strict_f1

__all__ = [
    "BUCKETS",
    "Counts",
    "EvalReport",
    "OFFSET_BINS",
    "bucket_of",
    "count_matches",
    "entity_keys",
    "length_report",
    "offset_histogram",
    "strict_counts",
    "strict_f1",
    "write_offset_csv",
]
