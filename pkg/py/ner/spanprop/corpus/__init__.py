from .jsonl import CorpusError, Entity, Sentence, read_jsonl, sentence_to_record, write_jsonl
from .stats import CorpusStats, corpus_stats
from .synthetic import SynthConfig, SynthConfigError, generate_synthetic, split_corpus
from .vocab import BOS, EOS, NONE_LABEL, UNK, Vocab, build_vocab

__all__ = [
    "BOS",
    "CorpusError",
    "CorpusStats",
    "EOS",
    "Entity",
    "NONE_LABEL",
    "Sentence",
    "SynthConfig",
    "SynthConfigError",
    "UNK",
    "Vocab",
    "build_vocab",
    "corpus_stats",
    "generate_synthetic",
    "read_jsonl",
    "sentence_to_record",
    "split_corpus",
    "write_jsonl",
]
