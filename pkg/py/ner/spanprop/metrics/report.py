from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

from tabulate import tabulate

from ..corpus import Sentence
from ..spans import Offsets, round_offset
from .strict import Counts, EntityKey, count_matches, entity_keys, strict_counts

BUCKETS = ("1<=L<5", "5<=L<10", "L>=10")
OFFSET_BINS = (0, 1, 2, 3, 4)


def bucket_of(length: int) -> str:
    if length < 5:
        return BUCKETS[0]
    if length < 10:
        return BUCKETS[1]
    return BUCKETS[2]


def offset_bin_name(value: int) -> str:
    return f">={value}" if value == OFFSET_BINS[-1] else str(value)


@dataclass
class EvalReport:
    overall: Counts
    per_length: Dict[int, Counts]
    buckets: Dict[str, Counts]
    offset_histogram: Dict[int, int] = field(default_factory=dict)
    proposals: int = 0
    gold_entities: int = 0
    repaired: int = 0

    @property
    def proposal_ratio(self) -> float:
        return self.proposals / self.gold_entities if self.gold_entities else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "overall": self.overall.to_dict(),
            "per_length": {str(length): c.to_dict() for length, c in self.per_length.items()},
            "buckets": {name: c.to_dict() for name, c in self.buckets.items()},
            "offset_histogram": {
                offset_bin_name(key): value for key, value in self.offset_histogram.items()
            },
            "proposals": self.proposals,
            "gold_entities": self.gold_entities,
            "proposal_ratio": self.proposal_ratio,
            "repaired_adjustments": self.repaired,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def render_text(self) -> str:
        headers = ["Len.", "Pr.", "Rec.", "F1", "Support"]

        def row(name: str, counts: Counts) -> List[Any]:
            return [
                name,
                100 * counts.precision,
                100 * counts.recall,
                100 * counts.f1,
                counts.support,
            ]

        overall = tabulate([row("all", self.overall)], headers=headers, floatfmt=".2f")
        lengths = tabulate(
            [row(str(length), c) for length, c in self.per_length.items()],
            headers=headers,
            floatfmt=".2f",
        )
        buckets = tabulate(
            [row(name, c) for name, c in self.buckets.items()], headers=headers, floatfmt=".2f"
        )
        offsets = tabulate(
            [[offset_bin_name(key), value] for key, value in self.offset_histogram.items()],
            headers=["|offset|", "count"],
        )
        ratio = (
            f"proposals: {self.proposals}  gold entities: {self.gold_entities}  "
            f"ratio: {self.proposal_ratio:.2f}  repaired: {self.repaired}"
        )
        return "\n\n".join(
            [
                "Overall\n" + overall,
                "By entity length\n" + lengths,
                "By length bucket\n" + buckets,
                "Boundary offsets\n" + offsets,
                ratio,
            ]
        )


def _group_by_length(keys: Iterable[EntityKey]) -> Dict[int, List[EntityKey]]:
    grouped: Dict[int, List[EntityKey]] = defaultdict(list)
    for key in keys:
        grouped[key[2] - key[1] + 1].append(key)
    return grouped


def length_report(predicted: Sequence[Sentence], gold: Sequence[Sentence]) -> EvalReport:
    """Strict counts overall, per entity length and per length bucket.

    Gold entities count toward their own length; predictions (and so false
    positives) toward the length of the predicted span.
    """

    overall = strict_counts(predicted, gold)
    predicted_by_length = _group_by_length(entity_keys(predicted))
    gold_by_length = _group_by_length(entity_keys(gold))

    per_length: Dict[int, Counts] = {}
    for length in sorted(set(predicted_by_length) | set(gold_by_length)):
        per_length[length] = count_matches(
            predicted_by_length.get(length, []), gold_by_length.get(length, [])
        )

    buckets = {name: Counts() for name in BUCKETS}
    for length, counts in per_length.items():
        buckets[bucket_of(length)] = buckets[bucket_of(length)] + counts

    return EvalReport(overall=overall, per_length=per_length, buckets=buckets)


def offset_histogram(offsets: Iterable[Offsets]) -> Dict[int, int]:
    """Pooled left/right rounded absolute offsets in bins 0, 1, 2, 3 and >=4."""

    histogram = {key: 0 for key in OFFSET_BINS}
    top = OFFSET_BINS[-1]
    for shift in offsets:
        for value in (shift.left, shift.right):
            if not math.isfinite(value):
                continue
            histogram[min(abs(round_offset(value)), top)] += 1
    return histogram


def write_offset_csv(path: Path, histogram: Dict[int, int]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["offset", "count"])
        for key, value in histogram.items():
            writer.writerow([offset_bin_name(key), value])
