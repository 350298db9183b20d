from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..corpus import Sentence, Vocab
from . import autograd as ag
from .autograd import Tensor
from .layers import MLP, BiLSTM, Embedding

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelDims:
    num_words: int
    num_chars: int
    num_classes: int
    word_dim: int = 32
    char_dim: int = 16
    hidden_dim: int = 64

    def __post_init__(self) -> None:
        if self.hidden_dim % 2 or self.char_dim % 2:
            raise ValueError(
                f"hidden_dim and char_dim must be even, got {self.hidden_dim} and {self.char_dim}"
            )
        if self.num_classes < 2:
            raise ValueError(f"num_classes must count None plus >= 1 category, got {self.num_classes}")

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


@dataclass
class EncodedBatch:
    """Token and character ids for a batch of sentences, rows concatenated."""

    token_ids: np.ndarray
    char_ids: np.ndarray
    char_lengths: np.ndarray
    lengths: np.ndarray
    offsets: np.ndarray

    @property
    def total_tokens(self) -> int:
        return int(self.lengths.sum())


def encode_batch(sentences: Sequence[Sentence], vocab: Vocab) -> EncodedBatch:
    token_ids: List[int] = []
    char_ids: List[int] = []
    char_lengths: List[int] = []
    for sentence in sentences:
        for token in sentence.tokens:
            token_ids.append(vocab.token_id(token))
            ids = vocab.char_ids(token)
            char_ids.extend(ids)
            char_lengths.append(len(ids))
    lengths = np.array([len(sentence) for sentence in sentences], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(np.int64)
    return EncodedBatch(
        token_ids=np.array(token_ids, dtype=np.int64),
        char_ids=np.array(char_ids, dtype=np.int64),
        char_lengths=np.array(char_lengths, dtype=np.int64),
        lengths=lengths,
        offsets=offsets,
    )


@dataclass
class SpanRows:
    """Spans of a batch expressed as rows of the encoded token matrix."""

    starts: np.ndarray
    ends: np.ndarray
    first: np.ndarray
    last: np.ndarray

    @classmethod
    def build(
        cls, batch: EncodedBatch, sentence_index: np.ndarray, starts: np.ndarray, ends: np.ndarray
    ) -> "SpanRows":
        sentence_index = np.asarray(sentence_index, dtype=np.int64)
        starts = np.asarray(starts, dtype=np.int64)
        ends = np.asarray(ends, dtype=np.int64)
        base = batch.offsets[sentence_index]
        return cls(
            starts=base + starts,
            ends=base + ends,
            first=starts == 0,
            last=ends == batch.lengths[sentence_index] - 1,
        )


class SpanProposalModel:
    """Token encoder plus filter, boundary-regressor and classifier heads."""

    def __init__(self, dims: ModelDims, seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        d = dims.hidden_dim
        self.dims = dims
        self.words = Embedding("encoder.words", dims.num_words, dims.word_dim, rng)
        self.chars = Embedding("encoder.chars", dims.num_chars, dims.char_dim, rng)
        self.char_rnn = BiLSTM("encoder.char_rnn", dims.char_dim, dims.char_dim // 2, rng)
        self.context_rnn = BiLSTM(
            "encoder.context_rnn", dims.word_dim + dims.char_dim, d // 2, rng
        )
        self.bos = ag.parameter(rng.normal(0.0, 0.1, size=(1, d)))
        self.eos = ag.parameter(rng.normal(0.0, 0.1, size=(1, d)))
        self.filter = MLP("heads.filter", 3 * d, d, 1, rng)
        self.regressor = MLP("heads.regressor", 3 * d, d, 2, rng)
        self.classifier = MLP("heads.classifier", 3 * d, d, dims.num_classes, rng)

    def params(self) -> Dict[str, Tensor]:
        named: Dict[str, Tensor] = {}
        for module in (self.words, self.chars, self.char_rnn, self.context_rnn):
            named.update(module.params())
        named["encoder.bos"] = self.bos
        named["encoder.eos"] = self.eos
        for head in (self.filter, self.regressor, self.classifier):
            named.update(head.params())
        return named

    def zero_grad(self) -> None:
        for param in self.params().values():
            param.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: param.data.copy() for name, param in self.params().items()}

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        params = self.params()
        missing = sorted(set(params) - set(state))
        extra = sorted(set(state) - set(params))
        if missing or extra:
            raise ValueError(f"parameter names differ: missing {missing}, unexpected {extra}")
        for name, param in params.items():
            values = np.asarray(state[name], dtype=np.float64)
            if values.shape != param.shape:
                raise ValueError(f"parameter {name}: shape {values.shape} != {param.shape}")
            param.data = values.copy()

    def encode(self, batch: EncodedBatch) -> Tensor:
        """Contextual vector h_i per token, shape (total_tokens, hidden_dim)."""

        char_vectors = self.chars(batch.char_ids)
        _, char_features = self.char_rnn(char_vectors, batch.char_lengths)
        word_vectors = self.words(batch.token_ids)
        token_inputs = ag.concat([word_vectors, char_features], axis=1)
        hidden, _ = self.context_rnn(token_inputs, batch.lengths)
        return hidden

    def span_repr_inner(self, hidden: Tensor, rows: SpanRows) -> Tensor:
        pooled = ag.span_max(hidden, rows.starts, rows.ends)
        return ag.concat(
            [pooled, ag.take_rows(hidden, rows.starts), ag.take_rows(hidden, rows.ends)], axis=1
        )

    def span_repr_outer(self, hidden: Tensor, rows: SpanRows) -> Tensor:
        total = hidden.shape[0]
        padded = ag.concat([hidden, self.bos, self.eos], axis=0)
        left = np.where(rows.first, total, rows.starts - 1)
        right = np.where(rows.last, total + 1, rows.ends + 1)
        pooled = ag.span_max(hidden, rows.starts, rows.ends)
        return ag.concat(
            [pooled, ag.take_rows(padded, left), ag.take_rows(padded, right)], axis=1
        )

    def filter_head(
        self, features: Tensor, *, dropout: float = 0.0, rng: Optional[np.random.Generator] = None
    ) -> Tensor:
        logits = self.filter(ag.dropout(features, dropout, rng))
        return ag.reshape(ag.sigmoid(logits), (features.shape[0],))

    def regressor_head(
        self, features: Tensor, *, dropout: float = 0.0, rng: Optional[np.random.Generator] = None
    ) -> Tensor:
        return self.regressor(ag.dropout(features, dropout, rng))

    def classifier_head(
        self, features: Tensor, *, dropout: float = 0.0, rng: Optional[np.random.Generator] = None
    ) -> Tensor:
        return ag.softmax(self.classifier(ag.dropout(features, dropout, rng)))
