from .decode import (
    DecodeResult,
    DecodeSettings,
    Proposal,
    ProposalBatch,
    classify_and_score,
    decode,
    decode_batch,
    decode_corpus,
    distinct,
    propose,
    to_sentence,
)
from .nms import NmsParams, ScoredSpan, decay, soft_nms, threshold_only

__all__ = [
    "DecodeResult",
    "DecodeSettings",
    "NmsParams",
    "Proposal",
    "ProposalBatch",
    "ScoredSpan",
    "classify_and_score",
    "decay",
    "decode",
    "decode_batch",
    "decode_corpus",
    "distinct",
    "propose",
    "soft_nms",
    "threshold_only",
    "to_sentence",
]
