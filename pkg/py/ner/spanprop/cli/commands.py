from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from tabulate import tabulate

from ..corpus import (
    CorpusError,
    CorpusStats,
    Sentence,
    SynthConfig,
    corpus_stats,
    generate_synthetic,
    split_corpus,
    write_jsonl,
)
from ..decoder import DecodeResult, decode_corpus, to_sentence
from ..metrics import EvalReport, length_report, offset_histogram, write_offset_csv
from ..neural import Checkpoint
from .config import HyperParams

LOGGER = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "dev", "test")


@dataclass
class Evaluation:
    report: EvalReport
    predicted: List[Sentence]
    results: List[DecodeResult]


def _check_labels(checkpoint: Checkpoint, corpus: Sequence[Sentence]) -> None:
    unknown = checkpoint.vocab.missing_labels(corpus)
    if unknown:
        raise CorpusError(f"Corpus uses labels unknown to the checkpoint: {unknown}")


def run_decoder(
    checkpoint: Checkpoint,
    hyperparams: HyperParams,
    corpus: Sequence[Sentence],
    *,
    logger: Optional[logging.Logger] = None,
) -> Tuple[List[DecodeResult], List[Sentence]]:
    results = decode_corpus(
        corpus, checkpoint.model, checkpoint.vocab, hyperparams.decode_settings(), logger=logger
    )
    predicted = [
        to_sentence(sentence, result, checkpoint.vocab) for sentence, result in zip(corpus, results)
    ]
    return results, predicted


def evaluate(
    checkpoint: Checkpoint,
    corpus: Sequence[Sentence],
    hyperparams: Optional[HyperParams] = None,
    *,
    logger: Optional[logging.Logger] = None,
) -> Evaluation:
    """Decode every sentence and score it against its gold entities."""

    active_logger = logger or LOGGER
    if not corpus:
        raise CorpusError("Cannot evaluate an empty corpus")
    _check_labels(checkpoint, corpus)
    hyperparams = hyperparams or HyperParams.from_dict(checkpoint.hyperparams)

    results, predicted = run_decoder(checkpoint, hyperparams, corpus, logger=active_logger)
    proposals = [proposal for result in results for proposal in result.proposals]

    report = length_report(predicted, corpus)
    report.offset_histogram = offset_histogram(proposal.offsets for proposal in proposals)
    report.proposals = len(proposals)
    report.gold_entities = sum(len(sentence.entities) for sentence in corpus)
    report.repaired = sum(1 for proposal in proposals if proposal.repaired)

    active_logger.info(
        "[eval] P=%.4f R=%.4f F1=%.4f proposals/entities=%.2f repaired=%d",
        report.overall.precision,
        report.overall.recall,
        report.overall.f1,
        report.proposal_ratio,
        report.repaired,
    )
    return Evaluation(report=report, predicted=predicted, results=results)


def write_report(report: EvalReport, out_dir: Path) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out_dir / "report.json",
        "text": out_dir / "report.txt",
        "offsets": out_dir / "offsets.csv",
    }
    paths["json"].write_text(report.to_json() + "\n", encoding="utf-8")
    paths["text"].write_text(report.render_text() + "\n", encoding="utf-8")
    write_offset_csv(paths["offsets"], report.offset_histogram)
    return paths


def predict(
    checkpoint: Checkpoint,
    corpus: Sequence[Sentence],
    out_path: Path,
    hyperparams: Optional[HyperParams] = None,
    *,
    logger: Optional[logging.Logger] = None,
) -> List[Sentence]:
    """Write one prediction record per input sentence, entities carrying scores."""

    active_logger = logger or LOGGER
    hyperparams = hyperparams or HyperParams.from_dict(checkpoint.hyperparams)
    results, predicted = run_decoder(checkpoint, hyperparams, corpus, logger=active_logger)
    write_jsonl(
        out_path,
        predicted,
        scores=[[item.score for item in result.entities] for result in results],
    )
    active_logger.info(
        "[predict] wrote %d sentences, %d entities to %s",
        len(predicted),
        sum(len(sentence.entities) for sentence in predicted),
        out_path,
    )
    return predicted


def synth(
    config: SynthConfig,
    seed: int,
    out_dir: Path,
    *,
    logger: Optional[logging.Logger] = None,
) -> Dict[str, Path]:
    active_logger = logger or LOGGER
    corpus = generate_synthetic(config, seed, logger=active_logger)
    out_dir = Path(out_dir)
    paths: Dict[str, Path] = {}
    for name, part in zip(SPLIT_NAMES, split_corpus(corpus, config.split)):
        paths[name] = out_dir / f"{name}.jsonl"
        write_jsonl(paths[name], part)
        active_logger.info("[synth] wrote %d sentences to %s", len(part), paths[name])
    return paths


def stats(corpus: Sequence[Sentence]) -> CorpusStats:
    return corpus_stats(corpus)


def render_stats(summary: CorpusStats) -> str:
    data = summary.to_dict()
    lengths = data.pop("length_histogram")
    table = tabulate(sorted(data.items()), headers=["statistic", "value"], floatfmt=".3f")
    histogram = tabulate(sorted(lengths.items(), key=lambda item: int(item[0])), headers=["length", "entities"])
    return table + "\n\n" + histogram
