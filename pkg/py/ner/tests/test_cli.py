from __future__ import annotations

import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
sys.path.append(str(ROOT))

from spanprop.cli import Adam, HyperParams, NumericError, Trainer, clip_gradients, learning_rate
from spanprop.cli.main import EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_OK, main
from spanprop.corpus import CorpusError, Entity, Sentence, read_jsonl, write_jsonl
from spanprop.neural import autograd as ag
from spanprop.neural import load_checkpoint
from spanprop.neural.autograd import Tensor
from spanprop.spans import Span

SYNTH_CONF = ROOT / "configs" / "synth.conf"
TINY_RUN = [
    "--set", "epochs=2",
    "--set", "windows=1-3",
    "--set", "word_dim=8",
    "--set", "char_dim=4",
    "--set", "hidden_dim=8",
    "--set", "batch_size=4",
]

CORPUS = [
    Sentence(
        tokens=("the", "Bank", "of", "China", "said"),
        entities=(Entity(Span(1, 3), "ORG"), Entity(Span(3, 3), "GPE")),
    ),
    Sentence(tokens=("Paris", "is", "big"), entities=(Entity(Span(0, 0), "GPE"),)),
]


def test_learning_rate_warms_up_then_decays_to_zero() -> None:
    rates = [learning_rate(step, 10, 1.0, 0.5) for step in range(1, 11)]
    assert rates[:5] == pytest.approx([0.2, 0.4, 0.6, 0.8, 1.0])
    assert rates[5:] == pytest.approx([0.8, 0.6, 0.4, 0.2, 0.0])
    assert learning_rate(1, 10, 1.0, 0.1) == pytest.approx(1.0)
    assert learning_rate(2, 10, 1.0, 0.1) == pytest.approx(8 / 9)
    assert learning_rate(3, 10, 0.5, 0.0) == pytest.approx(0.5 * 7 / 10)


def test_adam_first_step_moves_by_learning_rate() -> None:
    weight = ag.parameter(np.array([1.0, -2.0]))
    frozen = ag.parameter(np.array([3.0]))
    optimizer = Adam({"weight": weight, "frozen": frozen})
    weight.grad = np.array([0.5, -3.0])
    optimizer.step(0.1)
    np.testing.assert_allclose(weight.data, [0.9, -1.9], rtol=1e-6)
    np.testing.assert_array_equal(frozen.data, [3.0])
    assert optimizer.state_dict()["step"] == 1


def test_adam_minimises_a_quadratic() -> None:
    x = ag.parameter(np.array([4.0, -3.0]))
    optimizer = Adam({"x": x})
    for _ in range(500):
        x.zero_grad()
        ag.total(ag.mul(x, x)).backward()
        optimizer.step(0.05)
    assert np.all(np.abs(x.data) < 0.05)


def test_clip_gradients_scales_global_norm() -> None:
    a, b = ag.parameter(np.zeros(1)), ag.parameter(np.zeros(1))
    a.grad, b.grad = np.array([3.0]), np.array([4.0])
    assert clip_gradients({"a": a, "b": b}, 1.0) == pytest.approx(5.0)
    np.testing.assert_allclose([a.grad[0], b.grad[0]], [0.6, 0.8])

    a.grad, b.grad = np.array([3.0]), np.array([4.0])
    clip_gradients({"a": a, "b": b}, 0.0)
    np.testing.assert_array_equal([a.grad[0], b.grad[0]], [3.0, 4.0])


def test_trainer_rejects_unusable_corpora() -> None:
    with pytest.raises(CorpusError):
        Trainer(HyperParams(), [])
    dev = [Sentence(tokens=("Rome",), entities=(Entity(Span(0, 0), "LOC"),))]
    with pytest.raises(CorpusError) as exc:
        Trainer(HyperParams(), CORPUS, dev)
    assert "LOC" in str(exc.value)


def test_negative_sampling_depends_only_on_seed_epoch_and_sentence() -> None:
    hp = HyperParams(windows=(1, 2, 3), negative_ratio=1, word_dim=4, char_dim=4, hidden_dim=4)
    first, second = Trainer(hp, CORPUS), Trainer(hp, CORPUS)
    second.rng.random(10)
    assert first.sample(0, 3) == second.sample(0, 3)
    positives = sum(target.is_positive for target in first.targets[0])
    assert len(first.sample(0, 3)) == positives + positives * 1


def test_training_step_reduces_loss_on_fixed_batch() -> None:
    hp = HyperParams(windows=(1, 2, 3), dropout=0.0, lr=1e-2, warmup=0.0, epochs=50, word_dim=8, char_dim=4, hidden_dim=8)
    trainer = Trainer(hp, CORPUS)
    before = trainer.batch_loss([0, 1], epoch=1)[1]["total_loss"]
    for _ in range(20):
        trainer.step([0, 1], epoch=1)
    after = trainer.batch_loss([0, 1], epoch=1)[1]["total_loss"]
    assert after < before


def test_fit_without_dev_selects_by_training_loss(tmp_path: Path) -> None:
    hp = HyperParams(windows=(1, 2), epochs=3, word_dim=4, char_dim=4, hidden_dim=4)
    trainer = Trainer(hp, CORPUS)
    result = trainer.fit(tmp_path)
    best = max(result.history, key=lambda entry: -entry.total_loss)
    assert result.best_epoch == best.epoch
    assert result.best_metric == -best.total_loss
    assert [entry.selected for entry in result.history].count(True) >= 1

    lines = (tmp_path / "train_log.jsonl").read_text(encoding="utf-8").splitlines()
    assert [json.loads(line)["epoch"] for line in lines] == [1, 2, 3]
    last = load_checkpoint(tmp_path / "last.json")
    assert last.train_state["epoch"] == 3
    assert last.train_state["step"] == 3
    assert last.train_state["best_epoch"] == result.best_epoch
    resumed = Adam(trainer.model.params())
    resumed.load_state_dict(last.train_state["optimizer"])
    assert resumed.step_count == 3
    for name, moment in trainer.optimizer.m.items():
        np.testing.assert_array_equal(resumed.m[name], moment)
        np.testing.assert_array_equal(resumed.v[name], trainer.optimizer.v[name])
    best_checkpoint = load_checkpoint(tmp_path / "model.json")
    for name, values in result.best_state.items():
        np.testing.assert_array_equal(best_checkpoint.model.state_dict()[name], values)
        np.testing.assert_array_equal(result.model.state_dict()[name], values)


def test_non_finite_loss_aborts_with_numeric_error(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    def broken(self, indices, epoch):
        nan = float("nan")
        return Tensor(nan), {"filter_loss": nan, "regression_loss": 0.0, "classifier_loss": 0.0, "total_loss": nan}

    monkeypatch.setattr(Trainer, "batch_loss", broken)
    with pytest.raises(NumericError) as exc:
        Trainer(HyperParams(windows=(1,), word_dim=4, char_dim=4, hidden_dim=4), CORPUS).step([0], epoch=1)
    assert "epoch 1" in str(exc.value)

    path = tmp_path / "train.jsonl"
    write_jsonl(path, CORPUS)
    assert main(["train", "--train", str(path), "--out", str(tmp_path / "run"), *TINY_RUN]) == EXIT_NUMERIC


def synth_data(tmp_path: Path, sentences: int = 24) -> Path:
    out = tmp_path / "data"
    code = main(["synth", "--config", str(SYNTH_CONF), "--set", f"sentences={sentences}", "--out", str(out)])
    assert code == EXIT_OK
    return out


def test_synth_writes_three_deterministic_splits(tmp_path: Path) -> None:
    first = synth_data(tmp_path / "a", sentences=30)
    second = synth_data(tmp_path / "b", sentences=30)
    sizes = []
    for name in ("train", "dev", "test"):
        assert (first / f"{name}.jsonl").read_bytes() == (second / f"{name}.jsonl").read_bytes()
        sizes.append(len(read_jsonl(first / f"{name}.jsonl")))
    assert sizes == [24, 3, 3]

    assert main(["synth", "--config", str(SYNTH_CONF), "--seed", "8", "--out", str(tmp_path / "c")]) == EXIT_OK
    assert (tmp_path / "c" / "train.jsonl").read_bytes() != (first / "train.jsonl").read_bytes()


def test_stats_command_prints_json(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    path = tmp_path / "corpus.jsonl"
    write_jsonl(path, CORPUS)
    assert main(["stats", "--corpus", str(path), "--json"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["sentences"] == 2
    assert data["entities"] == 3
    assert data["nested_entities"] == 2
    assert data["length_histogram"] == {"1": 2, "3": 1}

    assert main(["stats", "--corpus", str(path)]) == EXIT_OK
    assert "nesting_ratio" in capsys.readouterr().out


def run_training(data: Path, out: Path, capsys: pytest.CaptureFixture) -> dict:
    code = main(
        ["train", "--train", str(data / "train.jsonl"), "--dev", str(data / "dev.jsonl"), "--out", str(out), *TINY_RUN]
    )
    assert code == EXIT_OK
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_train_eval_predict_pipeline(tmp_path: Path, capsys: pytest.CaptureFixture, caplog: pytest.LogCaptureFixture) -> None:
    data = synth_data(tmp_path)
    capsys.readouterr()
    with caplog.at_level(logging.INFO, logger="spanprop"):
        summary = run_training(data, tmp_path / "run", capsys)
    assert summary["best_epoch"] in (1, 2)
    assert Path(summary["checkpoint"]) == tmp_path / "run" / "model.json"
    assert any("[train] epoch 2" in record.getMessage() for record in caplog.records)

    checkpoint = str(tmp_path / "run" / "model.json")
    assert main(["eval", "--checkpoint", checkpoint, "--corpus", str(data / "test.jsonl"), "--out", str(tmp_path / "eval"), "--json"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert set(report) >= {"overall", "per_length", "buckets", "offset_histogram", "proposal_ratio"}
    assert math.isfinite(report["proposal_ratio"])
    for name in ("report.json", "report.txt", "offsets.csv"):
        assert (tmp_path / "eval" / name).exists()

    for out in ("p1", "p2"):
        assert main(["predict", "--checkpoint", checkpoint, "--corpus", str(data / "test.jsonl"), "--out", str(tmp_path / out)]) == EXIT_OK
    first = (tmp_path / "p1" / "predictions.jsonl").read_bytes()
    assert first == (tmp_path / "p2" / "predictions.jsonl").read_bytes()
    predicted = read_jsonl(tmp_path / "p1" / "predictions.jsonl")
    gold = read_jsonl(data / "test.jsonl")
    assert [sentence.tokens for sentence in predicted] == [sentence.tokens for sentence in gold]
    records = [json.loads(line) for line in first.decode("utf-8").splitlines()]
    assert sum(len(record["entities"]) for record in records) == sum(len(s.entities) for s in predicted)
    assert all(0.0 < entity["score"] <= 1.0 for record in records for entity in record["entities"])


def test_training_is_reproducible(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    data = synth_data(tmp_path, sentences=16)
    run_training(data, tmp_path / "one", capsys)
    run_training(data, tmp_path / "two", capsys)
    for name in ("model.json", "last.json", "train_log.jsonl"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_exit_codes(tmp_path: Path) -> None:
    corpus = tmp_path / "corpus.jsonl"
    write_jsonl(corpus, CORPUS)
    missing = str(tmp_path / "missing.json")

    assert main(["--help"]) == EXIT_OK
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert main(["train"]) == EXIT_CONFIG
    assert main(["train", "--train", str(corpus), "--set", "bogus=1"]) == EXIT_CONFIG
    assert main(["--log-level", "LOUD", "stats", "--corpus", str(corpus)]) == EXIT_CONFIG
    assert main(["eval", "--checkpoint", missing, "--corpus", str(corpus)]) == EXIT_DATA
    assert main(["stats", "--corpus", missing]) == EXIT_DATA
    assert main(["synth", "--set", "min_len=30", "--out", str(tmp_path / "s")]) != EXIT_OK

    broken = tmp_path / "broken.jsonl"
    broken.write_text('{"tokens": ["a"], "entities": [{"start": 0, "end": 3, "label": "X"}]}\n', encoding="utf-8")
    assert main(["stats", "--corpus", str(broken)]) == EXIT_DATA


def test_eval_rejects_labels_unknown_to_checkpoint(tmp_path: Path) -> None:
    corpus = tmp_path / "train.jsonl"
    write_jsonl(corpus, CORPUS)
    assert main(["train", "--train", str(corpus), "--out", str(tmp_path / "run"), *TINY_RUN]) == EXIT_OK

    other = tmp_path / "other.jsonl"
    write_jsonl(other, [Sentence(tokens=("Rome",), entities=(Entity(Span(0, 0), "LOC"),))])
    code = main(["eval", "--checkpoint", str(tmp_path / "run" / "model.json"), "--corpus", str(other), "--out", str(tmp_path / "eval")])
    assert code == EXIT_DATA


def test_eval_and_predict_read_config_files(tmp_path: Path) -> None:
    corpus = tmp_path / "train.jsonl"
    write_jsonl(corpus, CORPUS)
    assert main(["train", "--train", str(corpus), "--out", str(tmp_path / "run"), *TINY_RUN]) == EXIT_OK
    base = ["--checkpoint", str(tmp_path / "run" / "model.json"), "--corpus", str(corpus)]

    bad = tmp_path / "bad.conf"
    bad.write_text("keep_threshold = 7\n", encoding="utf-8")
    unknown = tmp_path / "unknown.conf"
    unknown.write_text("bogus_key = 1\n", encoding="utf-8")
    missing = tmp_path / "missing.conf"
    for command in ("eval", "predict"):
        out = ["--out", str(tmp_path / command)]
        for config in (missing, bad, unknown):
            assert main([command, *base, *out, "--config", str(config)]) == EXIT_CONFIG
        assert main([command, *base, *out, "--set", "nms_iou=2"]) == EXIT_CONFIG

    good = tmp_path / "good.conf"
    good.write_text("keep_threshold = 0.4\nuse_soft_nms = false\n", encoding="utf-8")
    for command in ("eval", "predict"):
        out = ["--out", str(tmp_path / command)]
        assert main([command, *base, *out, "--config", str(good), "--seed", "3"]) == EXIT_OK


def test_invalid_utf8_is_a_data_error(tmp_path: Path) -> None:
    path = tmp_path / "corpus.jsonl"
    write_jsonl(path, CORPUS[:1])
    with path.open("ab") as handle:
        handle.write(b'{"tokens": ["\xff\xfe"], "entities": []}\n')
    assert main(["stats", "--corpus", str(path)]) == EXIT_DATA

    checkpoint = tmp_path / "model.json"
    checkpoint.write_bytes(b'{"version": "\xff"}')
    assert main(["eval", "--checkpoint", str(checkpoint), "--corpus", str(tmp_path / "corpus.jsonl")]) == EXIT_DATA

    config = tmp_path / "run.conf"
    config.write_bytes(b"epochs = \xff\n")
    assert main(["train", "--train", str(path), "--config", str(config)]) == EXIT_CONFIG
