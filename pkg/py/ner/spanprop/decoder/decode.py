from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..corpus import Entity, Sentence, Vocab
from ..neural import SpanProposalModel, SpanRows, Tensor, encode_batch
from ..neural.model import EncodedBatch
from ..spans import Offsets, Span, adjust_flagged
from ..targets import WindowSet, enumerate_seeds
from .nms import NmsParams, ScoredSpan, soft_nms, threshold_only

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class DecodeSettings:
    windows: WindowSet
    keep_threshold: float = 0.5
    nms: NmsParams = field(default_factory=NmsParams)
    use_filter: bool = True
    use_regressor: bool = True
    use_soft_nms: bool = True


@dataclass
class Proposal:
    seed: Span
    filter_prob: float
    offsets: Offsets
    adjusted: Span
    repaired: bool = False
    class_probs: Optional[np.ndarray] = None


@dataclass
class ProposalBatch:
    sentences: List[Sentence]
    batch: EncodedBatch
    hidden: Tensor
    proposals: List[List[Proposal]]


@dataclass
class DecodeResult:
    entities: List[ScoredSpan]
    proposals: List[Proposal]


def propose(
    sentences: Sequence[Sentence],
    model: SpanProposalModel,
    vocab: Vocab,
    settings: DecodeSettings,
) -> ProposalBatch:
    """Filter every seed span and shift the kept ones by the regressed offsets."""

    batch = encode_batch(sentences, vocab)
    hidden = model.encode(batch)

    seeds: List[Span] = []
    owner: List[int] = []
    for index, sentence in enumerate(sentences):
        spans = enumerate_seeds(len(sentence), settings.windows)
        seeds.extend(spans)
        owner.extend([index] * len(spans))

    proposals: List[List[Proposal]] = [[] for _ in sentences]
    if not seeds:
        return ProposalBatch(list(sentences), batch, hidden, proposals)

    owner_arr = np.asarray(owner, dtype=np.int64)
    rows = SpanRows.build(
        batch,
        owner_arr,
        np.array([span.start for span in seeds]),
        np.array([span.end for span in seeds]),
    )
    if settings.use_filter:
        probs = model.filter_head(model.span_repr_inner(hidden, rows)).data
        keep = np.flatnonzero(probs > settings.keep_threshold)
    else:
        probs = np.ones(len(seeds))
        keep = np.arange(len(seeds))
    if keep.size == 0:
        return ProposalBatch(list(sentences), batch, hidden, proposals)

    kept_rows = SpanRows(
        starts=rows.starts[keep], ends=rows.ends[keep], first=rows.first[keep], last=rows.last[keep]
    )
    if settings.use_regressor:
        offsets = model.regressor_head(model.span_repr_outer(hidden, kept_rows)).data
    else:
        offsets = np.zeros((keep.size, 2))

    for position, seed_index in enumerate(keep):
        sentence_index = owner[int(seed_index)]
        seed = seeds[int(seed_index)]
        shift = Offsets(float(offsets[position, 0]), float(offsets[position, 1]))
        adjusted, repaired = adjust_flagged(seed, shift, len(sentences[sentence_index]))
        proposals[sentence_index].append(
            Proposal(
                seed=seed,
                filter_prob=float(probs[int(seed_index)]),
                offsets=shift,
                adjusted=adjusted,
                repaired=repaired,
            )
        )
    return ProposalBatch(list(sentences), batch, hidden, proposals)


def classify_and_score(
    proposal_batch: ProposalBatch, model: SpanProposalModel
) -> List[List[ScoredSpan]]:
    """Label each adjusted proposal by argmax; None-argmax proposals are dropped."""

    flat = [
        (index, proposal)
        for index, proposals in enumerate(proposal_batch.proposals)
        for proposal in proposals
    ]
    scored: List[List[ScoredSpan]] = [[] for _ in proposal_batch.proposals]
    if not flat:
        return scored

    rows = SpanRows.build(
        proposal_batch.batch,
        np.array([index for index, _ in flat]),
        np.array([proposal.adjusted.start for _, proposal in flat]),
        np.array([proposal.adjusted.end for _, proposal in flat]),
    )
    probs = model.classifier_head(model.span_repr_inner(proposal_batch.hidden, rows)).data
    labels = probs.argmax(axis=1)
    for (index, proposal), row, label in zip(flat, probs, labels):
        proposal.class_probs = row
        if label == 0:
            continue
        scored[index].append(ScoredSpan(proposal.adjusted, int(label), float(row[label])))
    return scored


def decode_batch(
    sentences: Sequence[Sentence],
    model: SpanProposalModel,
    vocab: Vocab,
    settings: DecodeSettings,
) -> List[DecodeResult]:
    """Propose, classify and suppress each sentence of the batch.

    Unlike raw ``soft_nms`` output, the returned entities hold one item per
    (span, label): ``distinct`` keeps the highest-scoring survivor of each.
    """

    proposal_batch = propose(sentences, model, vocab, settings)
    scored = classify_and_score(proposal_batch, model)
    suppress = soft_nms if settings.use_soft_nms else threshold_only
    return [
        DecodeResult(entities=distinct(suppress(candidates, settings.nms)), proposals=proposals)
        for candidates, proposals in zip(scored, proposal_batch.proposals)
    ]


def decode(
    sentence: Sentence, model: SpanProposalModel, vocab: Vocab, settings: DecodeSettings
) -> DecodeResult:
    return decode_batch([sentence], model, vocab, settings)[0]


def decode_corpus(
    corpus: Sequence[Sentence],
    model: SpanProposalModel,
    vocab: Vocab,
    settings: DecodeSettings,
    *,
    batch_size: int = 32,
    logger: Optional[logging.Logger] = None,
) -> List[DecodeResult]:
    active_logger = logger or LOGGER
    results: List[DecodeResult] = []
    for start in range(0, len(corpus), batch_size):
        results.extend(decode_batch(corpus[start : start + batch_size], model, vocab, settings))
    active_logger.debug(
        "[decoder] decoded %d sentences: %d proposals, %d entities",
        len(results),
        sum(len(result.proposals) for result in results),
        sum(len(result.entities) for result in results),
    )
    return results


def distinct(items: Sequence[ScoredSpan]) -> List[ScoredSpan]:
    """Distinct (span, label) predictions ordered by position.

    Soft-NMS only decays duplicates, so an exact copy may survive the score
    threshold; the highest-scored copy is kept.
    """

    best: Dict[Tuple[Span, int], ScoredSpan] = {}
    for item in items:
        key = (item.span, item.label)
        if key not in best or item.score > best[key].score:
            best[key] = item
    return sorted(best.values(), key=lambda item: (item.span.start, item.span.end, item.label))


def to_sentence(sentence: Sentence, result: DecodeResult, vocab: Vocab) -> Sentence:
    return Sentence(
        tokens=sentence.tokens,
        entities=tuple(
            Entity(item.span, vocab.labels[item.label]) for item in result.entities
        ),
        line=sentence.line,
    )
