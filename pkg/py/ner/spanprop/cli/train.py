from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..corpus import CorpusError, Sentence, Vocab, build_vocab
from ..decoder import decode_corpus, to_sentence
from ..metrics import strict_f1
from ..neural import ModelDims, SpanProposalModel, SpanRows, Tensor, encode_batch, save_checkpoint
from ..neural import autograd as ag
from ..neural.checkpoint import pack_array, unpack_array
from ..objective import classifier_loss, filter_loss, regression_loss, total_loss
from ..spans import Offsets, adjust
from ..targets import SpanTarget, assign_stage2, build_targets, downsample_negatives
from .config import HyperParams

LOGGER = logging.getLogger(__name__)

BEST_CHECKPOINT = "model.json"
LAST_CHECKPOINT = "last.json"
TRAIN_LOG = "train_log.jsonl"
LOSS_KEYS = ("filter_loss", "regression_loss", "classifier_loss", "total_loss")


class NumericError(ArithmeticError):
    pass


def learning_rate(step: int, total_steps: int, base: float, warmup: float) -> float:
    """Linear warmup over ``warmup`` of the steps, then linear decay to 0."""

    if total_steps <= 0:
        return base
    warmup_steps = int(round(warmup * total_steps))
    if warmup_steps > 0 and step <= warmup_steps:
        return base * step / warmup_steps
    remaining = total_steps - warmup_steps
    if remaining <= 0:
        return base
    return base * max(0.0, (total_steps - step) / remaining)


class Adam:
    """Adam with bias correction over a named parameter set."""

    def __init__(
        self,
        params: Dict[str, Tensor],
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.params = params
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(param.data) for name, param in params.items()}
        self.v = {name: np.zeros_like(param.data) for name, param in params.items()}

    def step(self, lr: float) -> None:
        self.step_count += 1
        t = self.step_count
        for name, param in self.params.items():
            if param.grad is None:
                continue
            grad = param.grad
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * grad
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * grad * grad
            m_hat = self.m[name] / (1.0 - self.beta1**t)
            v_hat = self.v[name] / (1.0 - self.beta2**t)
            param.data = param.data - lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self) -> Dict[str, Any]:
        return {
            "step": self.step_count,
            "m": {name: pack_array(values) for name, values in self.m.items()},
            "v": {name: pack_array(values) for name, values in self.v.items()},
        }

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        """Resume from ``state_dict`` output, e.g. the ``optimizer`` entry of last.json."""

        unknown = sorted(set(state["m"]) ^ set(self.params))
        if unknown:
            raise ValueError(f"Optimizer state does not match the parameters: {unknown}")
        self.step_count = int(state["step"])
        self.m = {name: unpack_array(data) for name, data in state["m"].items()}
        self.v = {name: unpack_array(data) for name, data in state["v"].items()}


def clip_gradients(params: Dict[str, Tensor], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``."""

    grads = [param.grad for param in params.values() if param.grad is not None]
    norm = math.sqrt(sum(float(np.sum(grad * grad)) for grad in grads))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for grad in grads:
            grad *= scale
    return norm


@dataclass
class EpochLog:
    epoch: int
    filter_loss: float
    regression_loss: float
    classifier_loss: float
    total_loss: float
    lr: float
    dev_precision: Optional[float] = None
    dev_recall: Optional[float] = None
    dev_f1: Optional[float] = None
    selected: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class TrainResult:
    model: SpanProposalModel
    vocab: Vocab
    history: List[EpochLog] = field(default_factory=list)
    best_epoch: int = 0
    best_metric: float = -math.inf
    best_state: Dict[str, np.ndarray] = field(default_factory=dict)
    best_path: Optional[Path] = None
    last_path: Optional[Path] = None
    log_path: Optional[Path] = None


class Trainer:
    """Joint training of the filter, regressor and classifier heads."""

    def __init__(
        self,
        hyperparams: HyperParams,
        train_corpus: Sequence[Sentence],
        dev_corpus: Optional[Sequence[Sentence]] = None,
        *,
        vocab: Optional[Vocab] = None,
        logger: Optional[logging.Logger] = None,
    ) -> None:
        self.hp = hyperparams
        self.logger = logger or LOGGER
        self.train_corpus = list(train_corpus)
        self.dev_corpus = list(dev_corpus) if dev_corpus else None
        if not self.train_corpus:
            raise CorpusError("Training corpus is empty")

        self.vocab = vocab or build_vocab(self.train_corpus, min_count=hyperparams.min_count)
        if self.dev_corpus is not None:
            unseen = self.vocab.missing_labels(self.dev_corpus)
            if unseen:
                raise CorpusError(f"Dev corpus uses labels absent from training: {unseen}")

        dims = ModelDims(
            num_words=len(self.vocab.tokens),
            num_chars=len(self.vocab.chars),
            num_classes=len(self.vocab.labels),
            word_dim=hyperparams.word_dim,
            char_dim=hyperparams.char_dim,
            hidden_dim=hyperparams.hidden_dim,
        )
        self.model = SpanProposalModel(dims, seed=hyperparams.seed)
        self.optimizer = Adam(
            self.model.params(), hyperparams.adam_beta1, hyperparams.adam_beta2, hyperparams.adam_eps
        )
        self.rng = np.random.default_rng(hyperparams.seed)
        self.label_ids = self.vocab.label_ids()

        windows = hyperparams.window_set
        self.targets: List[List[SpanTarget]] = [
            build_targets(
                len(sentence),
                sentence.entities,
                windows,
                hyperparams.positive_iou,
                hyperparams.effective_focus,
                self.label_ids,
            )
            for sentence in self.train_corpus
        ]
        self.steps_per_epoch = math.ceil(len(self.train_corpus) / hyperparams.batch_size)
        self.total_steps = self.steps_per_epoch * hyperparams.epochs
        self.logger.info(
            "[train] %d sentences, %d labels, %d seed spans, %d parameters",
            len(self.train_corpus),
            self.vocab.num_labels,
            sum(len(targets) for targets in self.targets),
            sum(param.data.size for param in self.model.params().values()),
        )

    def sample(self, index: int, epoch: int) -> List[SpanTarget]:
        """Negative sampling for one sentence; the stream depends only on (seed, epoch, index)."""

        rng = np.random.default_rng((self.hp.seed, epoch, index))
        return downsample_negatives(self.targets[index], self.hp.negative_ratio, rng)

    def batch_loss(
        self, indices: Sequence[int], epoch: int
    ) -> Tuple[Optional[Tensor], Dict[str, float]]:
        """Joint loss of one batch; ``None`` when no sentence has a seed span."""

        hp = self.hp
        sentences = [self.train_corpus[index] for index in indices]
        sampled = [self.sample(index, epoch) for index in indices]
        flat = [(position, target) for position, targets in enumerate(sampled) for target in targets]
        if not flat:
            return None, {key: 0.0 for key in LOSS_KEYS}

        batch = encode_batch(sentences, self.vocab)
        hidden = self.model.encode(batch)
        owner = np.array([position for position, _ in flat], dtype=np.int64)
        starts = np.array([target.span.start for _, target in flat], dtype=np.int64)
        ends = np.array([target.span.end for _, target in flat], dtype=np.int64)
        positive = np.array([target.is_positive for _, target in flat], dtype=bool)
        weights = np.array([target.weight for _, target in flat])
        rows = SpanRows.build(batch, owner, starts, ends)

        filter_term = Tensor(0.0)
        if hp.use_filter:
            probs = self.model.filter_head(
                self.model.span_repr_inner(hidden, rows), dropout=hp.dropout, rng=self.rng
            )
            filter_term = filter_loss(probs, positive, weights, hp.focal)

        regression_term = Tensor(0.0)
        shifts = np.zeros((len(flat), 2))
        if hp.use_regressor:
            offsets = self.model.regressor_head(
                self.model.span_repr_outer(hidden, rows), dropout=hp.dropout, rng=self.rng
            )
            shifts = offsets.data
            chosen = np.flatnonzero(positive)
            if chosen.size:
                picked = [flat[int(i)][1] for i in chosen]
                regression_term = regression_loss(
                    ag.take_rows(offsets, chosen),
                    np.array([[t.offsets.left, t.offsets.right] for t in picked]),
                    starts[chosen],
                    ends[chosen],
                    np.array([t.paired_gold.span.start for t in picked]),
                    np.array([t.paired_gold.span.end for t in picked]),
                )

        labels = np.zeros(len(flat), dtype=np.int64)
        class_weights = np.ones(len(flat))
        adjusted_starts = np.zeros(len(flat), dtype=np.int64)
        adjusted_ends = np.zeros(len(flat), dtype=np.int64)
        for i, (position, target) in enumerate(flat):
            moved = adjust(
                target.span,
                Offsets(float(shifts[i, 0]), float(shifts[i, 1])),
                len(sentences[position]),
            )
            labels[i], class_weights[i] = assign_stage2(
                moved, target.paired_gold, hp.classifier_iou, hp.effective_focus, self.label_ids
            )
            adjusted_starts[i], adjusted_ends[i] = moved.start, moved.end

        adjusted_rows = SpanRows.build(batch, owner, adjusted_starts, adjusted_ends)
        class_probs = self.model.classifier_head(
            self.model.span_repr_inner(hidden, adjusted_rows), dropout=hp.dropout, rng=self.rng
        )
        classifier_term = classifier_loss(class_probs, labels, class_weights)

        loss = total_loss(filter_term, regression_term, classifier_term, hp.weights)
        components = {
            "filter_loss": filter_term.item(),
            "regression_loss": regression_term.item(),
            "classifier_loss": classifier_term.item(),
            "total_loss": loss.item(),
        }
        return loss, components

    def step(self, indices: Sequence[int], epoch: int) -> Dict[str, float]:
        loss, components = self.batch_loss(indices, epoch)
        if loss is None:
            components["lr"] = 0.0
            return components
        if not math.isfinite(components["total_loss"]):
            raise NumericError(
                f"Non-finite loss at epoch {epoch}, step {self.optimizer.step_count + 1}: "
                + ", ".join(f"{key}={value}" for key, value in components.items())
            )
        params = self.model.params()
        self.model.zero_grad()
        loss.backward()
        norm = clip_gradients(params, self.hp.grad_clip)
        if not math.isfinite(norm):
            raise NumericError(
                f"Non-finite gradient norm at epoch {epoch}, step {self.optimizer.step_count + 1}"
            )
        lr = learning_rate(
            self.optimizer.step_count + 1, self.total_steps, self.hp.lr, self.hp.warmup
        )
        self.optimizer.step(lr)
        components["lr"] = lr
        return components

    def run_epoch(self, epoch: int) -> EpochLog:
        order = self.rng.permutation(len(self.train_corpus))
        sums = {key: 0.0 for key in LOSS_KEYS}
        lr = 0.0
        size = self.hp.batch_size
        for start in range(0, len(order), size):
            components = self.step([int(index) for index in order[start : start + size]], epoch)
            lr = components.pop("lr") or lr
            for key, value in components.items():
                sums[key] += value
        return EpochLog(epoch=epoch, lr=lr, **sums)

    def evaluate_dev(self) -> Tuple[float, float, float]:
        assert self.dev_corpus is not None
        results = decode_corpus(
            self.dev_corpus, self.model, self.vocab, self.hp.decode_settings(), logger=self.logger
        )
        predicted = [
            to_sentence(sentence, result, self.vocab)
            for sentence, result in zip(self.dev_corpus, results)
        ]
        return strict_f1(predicted, self.dev_corpus)

    def train_state(self, epoch: int, best_metric: float, best_epoch: int) -> Dict[str, Any]:
        return {
            "epoch": epoch,
            "step": self.optimizer.step_count,
            "best_metric": best_metric,
            "best_epoch": best_epoch,
            "rng": self.rng.bit_generator.state,
            "optimizer": self.optimizer.state_dict(),
        }

    def fit(self, out_dir: Optional[Path] = None) -> TrainResult:
        result = TrainResult(model=self.model, vocab=self.vocab)
        hyperparams = self.hp.to_dict()
        log_handle = None
        if out_dir is not None:
            out_dir = Path(out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            result.best_path = out_dir / BEST_CHECKPOINT
            result.last_path = out_dir / LAST_CHECKPOINT
            result.log_path = out_dir / TRAIN_LOG
            log_handle = result.log_path.open("w", encoding="utf-8")

        try:
            for epoch in range(1, self.hp.epochs + 1):
                entry = self.run_epoch(epoch)
                if self.dev_corpus is not None:
                    entry.dev_precision, entry.dev_recall, entry.dev_f1 = self.evaluate_dev()
                    metric = entry.dev_f1
                else:
                    metric = -entry.total_loss

                if metric > result.best_metric:
                    result.best_metric = metric
                    result.best_epoch = epoch
                    result.best_state = self.model.state_dict()
                    entry.selected = True
                    if result.best_path is not None:
                        save_checkpoint(
                            result.best_path, self.model, self.vocab, hyperparams, logger=self.logger
                        )

                self.logger.info(
                    "[train] epoch %d loss=%.4f (filter=%.4f regressor=%.4f classifier=%.4f) "
                    "lr=%.2e dev_f1=%s%s",
                    epoch,
                    entry.total_loss,
                    entry.filter_loss,
                    entry.regression_loss,
                    entry.classifier_loss,
                    entry.lr,
                    "n/a" if entry.dev_f1 is None else f"{entry.dev_f1:.4f}",
                    " *" if entry.selected else "",
                )
                result.history.append(entry)
                if log_handle is not None:
                    log_handle.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")
                    log_handle.flush()
                if result.last_path is not None:
                    save_checkpoint(
                        result.last_path,
                        self.model,
                        self.vocab,
                        hyperparams,
                        self.train_state(epoch, result.best_metric, result.best_epoch),
                        logger=self.logger,
                    )
        finally:
            if log_handle is not None:
                log_handle.close()

        if result.best_state:
            self.model.load_state_dict(result.best_state)
        self.logger.info(
            "[train] selected epoch %d (%s %.4f)",
            result.best_epoch,
            "dev_f1" if self.dev_corpus is not None else "-loss",
            result.best_metric,
        )
        return result


def train(
    hyperparams: HyperParams,
    train_corpus: Sequence[Sentence],
    dev_corpus: Optional[Sequence[Sentence]] = None,
    out_dir: Optional[Path] = None,
    *,
    logger: Optional[logging.Logger] = None,
) -> TrainResult:
    return Trainer(hyperparams, train_corpus, dev_corpus, logger=logger).fit(out_dir)
