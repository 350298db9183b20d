from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest
from jsonschema import Draft7Validator

ROOT = Path(__file__).resolve().parents[1]
sys.path.append(str(ROOT))

from spanprop.corpus import (
    BOS,
    EOS,
    NONE_LABEL,
    UNK,
    CorpusError,
    Entity,
    Sentence,
    SynthConfig,
    SynthConfigError,
    build_vocab,
    corpus_stats,
    generate_synthetic,
    read_jsonl,
    split_corpus,
    write_jsonl,
)
from spanprop.corpus.schema import SENTENCE_SCHEMA, SYNTH_CONFIG_SCHEMA
from spanprop.spans import Span


def write_lines(path: Path, *records: object) -> Path:
    path.write_text("\n".join(json.dumps(record) for record in records) + "\n", encoding="utf-8")
    return path


def sentence(tokens: str, *entities: tuple) -> Sentence:
    return Sentence(
        tokens=tuple(tokens.split()),
        entities=tuple(Entity(Span(start, end), label) for start, end, label in entities),
    )


def test_schemas_are_self_validating() -> None:
    Draft7Validator.check_schema(SENTENCE_SCHEMA)
    Draft7Validator.check_schema(SYNTH_CONFIG_SCHEMA)


def test_minimal_record_loads(tmp_path: Path) -> None:
    path = write_lines(
        tmp_path / "one.jsonl",
        {"tokens": ["a", "b"], "entities": [{"start": 0, "end": 1, "label": "PER"}]},
    )
    corpus = read_jsonl(path)
    assert len(corpus) == 1
    assert corpus[0].entities == (Entity(Span(0, 1), "PER"),)


def test_span_out_of_range_names_the_line(tmp_path: Path) -> None:
    path = write_lines(
        tmp_path / "bad.jsonl",
        {"tokens": ["a"], "entities": [{"start": 0, "end": 2, "label": "PER"}]},
    )
    with pytest.raises(CorpusError) as exc:
        read_jsonl(path)
    assert "span out of range, line 1" in str(exc.value)


def test_empty_file_is_empty_corpus(tmp_path: Path) -> None:
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    assert read_jsonl(path) == []


def test_malformed_json_is_actionable(tmp_path: Path) -> None:
    path = tmp_path / "broken.jsonl"
    path.write_text('{"tokens": ["a"]}\n{"tokens": [\n', encoding="utf-8")
    with pytest.raises(CorpusError) as exc:
        read_jsonl(path)
    assert "line 2" in str(exc.value)
    assert isinstance(exc.value.__cause__, json.JSONDecodeError)


def test_invalid_utf8_names_the_line(tmp_path: Path) -> None:
    path = tmp_path / "latin1.jsonl"
    path.write_bytes(b'{"tokens": ["a"]}\n{"tokens": ["\xff\xfe"]}\n')
    with pytest.raises(CorpusError) as exc:
        read_jsonl(path)
    assert "line 2: not valid UTF-8" in str(exc.value)
    assert isinstance(exc.value.__cause__, UnicodeDecodeError)


def test_schema_violations_are_rejected(tmp_path: Path) -> None:
    path = write_lines(tmp_path / "bad.jsonl", {"tokens": []})
    with pytest.raises(CorpusError):
        read_jsonl(path)

    path = write_lines(
        tmp_path / "label.jsonl", {"tokens": ["a"], "entities": [{"start": 0, "end": 0}]}
    )
    with pytest.raises(CorpusError):
        read_jsonl(path)


def test_duplicate_entities_are_rejected() -> None:
    with pytest.raises(CorpusError):
        sentence("a b", (0, 1, "PER"), (0, 1, "PER"))


def test_same_span_with_two_labels_is_allowed() -> None:
    item = sentence("a b", (0, 1, "PER"), (0, 1, "ORG"))
    assert len(item.entities) == 2


def test_missing_file_raises(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        read_jsonl(tmp_path / "absent.jsonl")


def test_write_then_read_preserves_corpus(tmp_path: Path) -> None:
    corpus = [
        sentence("the Bank of China said", (1, 3, "ORG"), (3, 3, "GPE")),
        sentence("nothing here"),
    ]
    path = tmp_path / "out.jsonl"
    write_jsonl(path, corpus)
    assert read_jsonl(path) == corpus


def test_scores_are_written_and_tolerated_on_read(tmp_path: Path) -> None:
    corpus = [sentence("a b c", (0, 0, "PER"), (1, 2, "ORG"))]
    path = tmp_path / "scored.jsonl"
    write_jsonl(path, corpus, scores=[[0.9, 0.75]])
    record = json.loads(path.read_text(encoding="utf-8"))
    assert [entity["score"] for entity in record["entities"]] == [0.9, 0.75]
    assert read_jsonl(path) == corpus


def test_vocab_min_count_maps_rare_tokens_to_unknown() -> None:
    corpus = [sentence("a a b"), sentence("a")]
    vocab = build_vocab(corpus, min_count=2)
    assert "a" in vocab.tokens
    assert "b" not in vocab.tokens
    assert vocab.token_id("b") == vocab.tokens[UNK]

    assert "b" in build_vocab(corpus, min_count=1).tokens


def test_vocab_reserves_sentinels_and_orders_labels() -> None:
    vocab = build_vocab([sentence("x y", (0, 0, "PER"), (1, 1, "ORG"))])
    assert [vocab.tokens[UNK], vocab.tokens[BOS], vocab.tokens[EOS]] == [0, 1, 2]
    assert vocab.labels == [NONE_LABEL, "ORG", "PER"]
    assert vocab.label_ids() == {NONE_LABEL: 0, "ORG": 1, "PER": 2}
    assert vocab.num_labels == 2
    assert vocab.char_ids("x?") == [vocab.chars["x"], 0]


def test_vocab_rejects_empty_corpus_and_reserved_label() -> None:
    with pytest.raises(CorpusError):
        build_vocab([])
    with pytest.raises(CorpusError):
        build_vocab([sentence("a", (0, 0, NONE_LABEL))])


def test_vocab_dict_round_trip() -> None:
    vocab = build_vocab([sentence("b a c", (0, 1, "PER"))])
    restored = type(vocab).from_dict(json.loads(json.dumps(vocab.to_dict())))
    assert restored == vocab


def test_missing_labels_lists_unknown_categories() -> None:
    vocab = build_vocab([sentence("a", (0, 0, "PER"))])
    assert vocab.missing_labels([sentence("a b", (0, 0, "LOC"), (1, 1, "PER"))]) == ["LOC"]


def test_synthetic_corpus_is_deterministic(tmp_path: Path) -> None:
    config = SynthConfig(sentences=10)
    first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_jsonl(first, generate_synthetic(config, seed=7))
    write_jsonl(second, generate_synthetic(config, seed=7))
    assert first.read_bytes() == second.read_bytes()


def test_synthetic_without_nesting_has_no_overlaps() -> None:
    corpus = generate_synthetic(SynthConfig(sentences=60, nesting_prob=0.0), seed=1)
    for item in corpus:
        spans = [entity.span for entity in item.entities]
        for index, a in enumerate(spans):
            for b in spans[index + 1 :]:
                assert a.end < b.start or b.end < a.start


def test_certain_nesting_puts_an_entity_in_every_top_level_entity() -> None:
    corpus = generate_synthetic(
        SynthConfig(sentences=60, nesting_prob=1.0, max_depth=2), seed=2
    )
    assert any(item.entities for item in corpus)
    for item in corpus:
        spans = [entity.span for entity in item.entities]
        top = [s for s in spans if not any(o != s and o.contains(s) for o in spans)]
        for outer in top:
            assert any(inner != outer and outer.contains(inner) for inner in spans)


def test_synthetic_entities_are_in_range_and_use_configured_lengths() -> None:
    config = SynthConfig(sentences=80, entity_lengths=(1, 2, 3, 6, 8))
    for item in generate_synthetic(config, seed=3):
        assert config.min_len <= len(item) <= config.max_len
        for entity in item.entities:
            assert entity.span.within(len(item))
            assert entity.span.length in config.entity_lengths
            assert entity.label in {config.label_name(c) for c in range(config.categories)}


@pytest.mark.parametrize(
    "changes",
    [
        {"min_len": 12, "max_len": 6},
        {"min_entities": 4, "max_entities": 2},
        {"entity_lengths": [30], "max_len": 20},
        {"split": [0, 0, 0]},
    ],
)
def test_infeasible_synth_configs_raise(changes: dict) -> None:
    with pytest.raises(SynthConfigError):
        SynthConfig.from_mapping(changes)


def test_synth_config_schema_rejects_unknown_keys() -> None:
    with pytest.raises(SynthConfigError):
        SynthConfig.from_mapping({"sentence_count": 3})


def test_split_follows_proportions() -> None:
    corpus = generate_synthetic(SynthConfig(sentences=50), seed=4)
    train, dev, test = split_corpus(corpus, (8, 1, 1))
    assert (len(train), len(dev), len(test)) == (40, 5, 5)
    assert train + dev + test == corpus


def test_corpus_stats_counts_nesting() -> None:
    corpus = [
        sentence("the Bank of China said", (1, 3, "ORG"), (3, 3, "GPE")),
        sentence("Paris is big", (0, 0, "GPE")),
    ]
    stats = corpus_stats(corpus)
    assert stats.sentences == 2
    assert stats.nested_sentences == 1
    assert stats.entities == 3
    assert stats.nested_entities == 2
    assert stats.nesting_ratio == pytest.approx(2 / 3)
    assert stats.avg_length == pytest.approx(4.0)
    assert stats.length_histogram == {1: 2, 3: 1}


def test_corpus_stats_of_empty_corpus() -> None:
    stats = corpus_stats([])
    assert stats.entities == 0
    assert stats.nesting_ratio == 0.0
