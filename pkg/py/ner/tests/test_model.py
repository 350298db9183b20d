from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
sys.path.append(str(ROOT))
sys.path.append(str(Path(__file__).resolve().parent))

from gradcheck import check_gradients
from spanprop.cli import HyperParams, Trainer
from spanprop.corpus import Entity, Sentence, build_vocab
from spanprop.neural import (
    CheckpointError,
    ModelDims,
    SpanProposalModel,
    SpanRows,
    encode_batch,
    load_checkpoint,
    save_checkpoint,
)
from spanprop.neural import autograd as ag
from spanprop.neural.autograd import Tensor
from spanprop.spans import Span

CORPUS = [
    Sentence(
        tokens=("the", "Bank", "of", "China", "said"),
        entities=(Entity(Span(1, 3), "ORG"), Entity(Span(3, 3), "GPE")),
    ),
    Sentence(tokens=("Paris", "is", "big"), entities=(Entity(Span(0, 0), "GPE"),)),
]

TINY = dict(word_dim=4, char_dim=4, hidden_dim=4)


def tiny_model(seed: int = 0) -> tuple:
    vocab = build_vocab(CORPUS)
    dims = ModelDims(len(vocab.tokens), len(vocab.chars), len(vocab.labels), **TINY)
    return SpanProposalModel(dims, seed=seed), vocab


def rows_for(batch, spans: list) -> SpanRows:
    return SpanRows.build(
        batch,
        np.array([index for index, _ in spans]),
        np.array([span.start for _, span in spans]),
        np.array([span.end for _, span in spans]),
    )


def test_encode_returns_one_vector_per_token() -> None:
    model, vocab = tiny_model()
    batch = encode_batch(CORPUS, vocab)
    hidden = model.encode(batch)
    assert hidden.shape == (8, 4)
    assert batch.total_tokens == 8


def test_encoding_is_deterministic_and_batch_independent() -> None:
    model, vocab = tiny_model()
    alone = model.encode(encode_batch(CORPUS[1:], vocab)).data
    together = model.encode(encode_batch(CORPUS, vocab)).data
    np.testing.assert_allclose(together[5:], alone, atol=1e-12)
    np.testing.assert_array_equal(alone, model.encode(encode_batch(CORPUS[1:], vocab)).data)


def test_unknown_tokens_encode_through_reserved_ids() -> None:
    model, vocab = tiny_model()
    hidden = model.encode(encode_batch([Sentence(tokens=("zzz", "ÿ"))], vocab))
    assert hidden.shape == (2, 4)
    assert np.all(np.isfinite(hidden.data))


def test_inner_representation_of_single_token_span() -> None:
    model, vocab = tiny_model()
    batch = encode_batch(CORPUS, vocab)
    hidden = model.encode(batch)
    features = model.span_repr_inner(hidden, rows_for(batch, [(1, Span(1, 1))])).data[0]
    h = hidden.data[6]
    np.testing.assert_array_equal(features, np.concatenate([h, h, h]))


def test_inner_representation_pools_whole_sentence() -> None:
    model, vocab = tiny_model()
    batch = encode_batch(CORPUS, vocab)
    hidden = model.encode(batch)
    features = model.span_repr_inner(hidden, rows_for(batch, [(0, Span(0, 4))])).data[0]
    np.testing.assert_array_equal(features[:4], hidden.data[0:5].max(axis=0))
    np.testing.assert_array_equal(features[4:8], hidden.data[0])
    np.testing.assert_array_equal(features[8:], hidden.data[4])


def test_outer_representation_uses_sentinels_at_edges() -> None:
    model, vocab = tiny_model()
    batch = encode_batch(CORPUS, vocab)
    hidden = model.encode(batch)
    spans = [(0, Span(0, 1)), (0, Span(3, 4)), (1, Span(1, 1)), (1, Span(0, 2))]
    features = model.span_repr_outer(hidden, rows_for(batch, spans)).data

    bos, eos = model.bos.data[0], model.eos.data[0]
    np.testing.assert_array_equal(features[0, 4:8], bos)
    np.testing.assert_array_equal(features[0, 8:], hidden.data[2])
    np.testing.assert_array_equal(features[1, 4:8], hidden.data[2])
    np.testing.assert_array_equal(features[1, 8:], eos)
    np.testing.assert_array_equal(features[2, 4:8], hidden.data[5])
    np.testing.assert_array_equal(features[2, 8:], hidden.data[7])
    np.testing.assert_array_equal(features[3, 4:8], bos)
    np.testing.assert_array_equal(features[3, 8:], eos)


def test_single_token_sentence_uses_both_sentinels() -> None:
    model, vocab = tiny_model()
    batch = encode_batch([Sentence(tokens=("Paris",))], vocab)
    hidden = model.encode(batch)
    features = model.span_repr_outer(hidden, rows_for(batch, [(0, Span(0, 0))])).data[0]
    np.testing.assert_array_equal(features[4:8], model.bos.data[0])
    np.testing.assert_array_equal(features[8:], model.eos.data[0])


def zero_head(head) -> None:
    for param in head.params().values():
        param.data = np.zeros_like(param.data)


def test_heads_with_zero_weights() -> None:
    model, _ = tiny_model()
    features = Tensor(np.random.default_rng(0).normal(size=(3, 12)))

    zero_head(model.filter)
    np.testing.assert_allclose(model.filter_head(features).data, [0.5, 0.5, 0.5])

    zero_head(model.regressor)
    model.regressor.second.bias.data = np.array([0.3, -0.2])
    np.testing.assert_allclose(model.regressor_head(features).data, [[0.3, -0.2]] * 3)

    zero_head(model.classifier)
    probs = model.classifier_head(features).data
    np.testing.assert_allclose(probs, np.full((3, 3), 1.0 / 3.0))


def test_head_outputs_are_valid() -> None:
    model, _ = tiny_model()
    features = Tensor(np.random.default_rng(1).normal(size=(6, 12)) * 5.0)
    probs = model.filter_head(features).data
    assert probs.shape == (6,)
    assert np.all((probs > 0.0) & (probs < 1.0))
    assert model.regressor_head(features).shape == (6, 2)
    np.testing.assert_allclose(model.classifier_head(features).data.sum(axis=1), np.ones(6))


@pytest.mark.parametrize("head", ["filter", "regressor", "classifier"])
def test_head_gradients(head: str) -> None:
    model, _ = tiny_model(seed=3)
    rng = np.random.default_rng(4)
    features = Tensor(rng.normal(size=(5, 12)))
    forward = getattr(model, f"{head}_head")
    weights = rng.normal(size=forward(features).shape)
    check_gradients(
        lambda: ag.total(ag.mul(forward(features), weights)), getattr(model, head).params()
    )


def test_encoder_gradients_through_span_representations() -> None:
    model, vocab = tiny_model(seed=5)
    batch = encode_batch(CORPUS, vocab)
    spans = [(0, Span(0, 2)), (0, Span(3, 4)), (1, Span(1, 2))]
    rows = rows_for(batch, spans)
    weights = np.random.default_rng(6).normal(size=(3, 12))

    def loss() -> Tensor:
        hidden = model.encode(batch)
        both = ag.add(model.span_repr_inner(hidden, rows), model.span_repr_outer(hidden, rows))
        return ag.total(ag.mul(both, weights))

    encoder = {name: p for name, p in model.params().items() if name.startswith("encoder.")}
    check_gradients(loss, encoder)


def test_joint_objective_gradients() -> None:
    hyperparams = HyperParams(windows=(1, 2, 3), dropout=0.0, seed=2, **TINY)
    trainer = Trainer(hyperparams, CORPUS)
    # small offsets keep the rounded adjustments fixed under perturbation;
    # the bias keeps predicted boundaries off the min/max kinks of the overlap term
    trainer.model.regressor.second.weight.data *= 0.1
    trainer.model.regressor.second.bias.data += 0.2
    check_gradients(lambda: trainer.batch_loss([0, 1], epoch=1)[0], trainer.model.params())


def test_load_state_dict_rejects_mismatched_parameters() -> None:
    model, _ = tiny_model()
    state = model.state_dict()
    state.pop("encoder.bos")
    with pytest.raises(ValueError):
        model.load_state_dict(state)

    state = model.state_dict()
    state["encoder.bos"] = np.zeros((2, 4))
    with pytest.raises(ValueError):
        model.load_state_dict(state)


def test_model_dims_validation() -> None:
    with pytest.raises(ValueError):
        ModelDims(5, 5, 3, hidden_dim=5)
    with pytest.raises(ValueError):
        ModelDims(5, 5, 1)


def test_checkpoint_round_trip_is_bit_exact(tmp_path: Path) -> None:
    model, vocab = tiny_model(seed=9)
    path = tmp_path / "model.json"
    save_checkpoint(path, model, vocab, {"seed": 9}, {"epoch": 3})
    restored = load_checkpoint(path)

    for name, values in model.state_dict().items():
        np.testing.assert_array_equal(restored.model.state_dict()[name], values)
    assert restored.vocab == vocab
    assert restored.hyperparams == {"seed": 9}
    assert restored.train_state == {"epoch": 3}

    again = tmp_path / "again.json"
    save_checkpoint(again, restored.model, restored.vocab, {"seed": 9}, {"epoch": 3})
    assert again.read_bytes() == path.read_bytes()


def test_checkpoint_errors_are_actionable(tmp_path: Path) -> None:
    model, vocab = tiny_model()
    path = tmp_path / "model.json"
    save_checkpoint(path, model, vocab, {})
    document = json.loads(path.read_text(encoding="utf-8"))

    document["version"] = "0.0.1"
    path.write_text(json.dumps(document), encoding="utf-8")
    with pytest.raises(CheckpointError) as exc:
        load_checkpoint(path)
    assert "version" in str(exc.value)

    document["version"] = "1.0.0"
    document["params"]["encoder.bos"]["shape"] = [2, 2]
    path.write_text(json.dumps(document), encoding="utf-8")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)

    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)

    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "missing.json")
