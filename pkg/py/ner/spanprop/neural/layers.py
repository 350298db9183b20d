from __future__ import annotations

from typing import Dict, List, Sequence, Tuple

import numpy as np

from . import autograd as ag
from .autograd import Tensor


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class Linear:
    def __init__(self, name: str, fan_in: int, fan_out: int, rng: np.random.Generator) -> None:
        self.weight = ag.parameter(xavier(rng, fan_in, fan_out))
        self.bias = ag.parameter(np.zeros(fan_out))
        self.name = name

    def params(self) -> Dict[str, Tensor]:
        return {f"{self.name}.weight": self.weight, f"{self.name}.bias": self.bias}

    def __call__(self, x: Tensor) -> Tensor:
        return ag.add(ag.matmul(x, self.weight), self.bias)


class MLP:
    """linear -> GELU -> linear"""

    def __init__(
        self, name: str, fan_in: int, hidden: int, fan_out: int, rng: np.random.Generator
    ) -> None:
        self.first = Linear(f"{name}.0", fan_in, hidden, rng)
        self.second = Linear(f"{name}.1", hidden, fan_out, rng)

    def params(self) -> Dict[str, Tensor]:
        return {**self.first.params(), **self.second.params()}

    def __call__(self, x: Tensor) -> Tensor:
        return self.second(ag.gelu(self.first(x)))


class Embedding:
    def __init__(self, name: str, rows: int, dim: int, rng: np.random.Generator) -> None:
        self.table = ag.parameter(rng.normal(0.0, 0.1, size=(rows, dim)))
        self.name = name

    def params(self) -> Dict[str, Tensor]:
        return {f"{self.name}.table": self.table}

    def __call__(self, ids: np.ndarray) -> Tensor:
        ids = np.asarray(ids, dtype=np.int64)
        rows = self.table.shape[0]
        if ids.size and (ids.min() < 0 or ids.max() >= rows):
            raise ValueError(
                f"{self.name}: id out of table range [0, {rows}): {int(ids.min())}..{int(ids.max())}"
            )
        return ag.take_rows(self.table, ids)


def _layout(lengths: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """Time-major row indices for left-aligned forward and reversed sequences.

    Sequence b occupies rows ``offsets[b] .. offsets[b] + lengths[b] - 1``.
    Padding slots point at row 0; their outputs are never read.
    """

    lengths_arr = np.asarray(lengths, dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths_arr)[:-1]]).astype(np.int64)
    steps = int(lengths_arr.max())
    t = np.arange(steps)[:, None]
    valid = t < lengths_arr[None, :]
    forward = np.where(valid, offsets[None, :] + t, 0)
    backward = np.where(valid, offsets[None, :] + lengths_arr[None, :] - 1 - t, 0)
    return forward, backward


class LSTM:
    """Single-direction LSTM run over a time-major batch of row indices."""

    def __init__(self, name: str, fan_in: int, hidden: int, rng: np.random.Generator) -> None:
        self.hidden = hidden
        self.input_weight = ag.parameter(xavier(rng, fan_in, 4 * hidden))
        self.state_weight = ag.parameter(xavier(rng, hidden, 4 * hidden))
        bias = np.zeros(4 * hidden)
        bias[hidden : 2 * hidden] = 1.0
        self.bias = ag.parameter(bias)
        self.name = name

    def params(self) -> Dict[str, Tensor]:
        return {
            f"{self.name}.input_weight": self.input_weight,
            f"{self.name}.state_weight": self.state_weight,
            f"{self.name}.bias": self.bias,
        }

    def run(self, x: Tensor, rows: np.ndarray) -> Tensor:
        """Return hidden states as a (steps * batch, hidden) tensor, time-major."""

        steps, batch = rows.shape
        h_size = self.hidden
        gathered = ag.take_rows(x, rows.reshape(-1))
        projected = ag.add(ag.matmul(gathered, self.input_weight), self.bias)

        h = Tensor(np.zeros((batch, h_size)))
        c = Tensor(np.zeros((batch, h_size)))
        outputs: List[Tensor] = []
        for step in range(steps):
            gates = ag.add(
                ag.row_slice(projected, step * batch, (step + 1) * batch),
                ag.matmul(h, self.state_weight),
            )
            i = ag.sigmoid(ag.col_slice(gates, 0, h_size))
            f = ag.sigmoid(ag.col_slice(gates, h_size, 2 * h_size))
            g = ag.tanh(ag.col_slice(gates, 2 * h_size, 3 * h_size))
            o = ag.sigmoid(ag.col_slice(gates, 3 * h_size, 4 * h_size))
            c = ag.add(ag.mul(f, c), ag.mul(i, g))
            h = ag.mul(o, ag.tanh(c))
            outputs.append(h)
        return ag.stack_rows(outputs)


class BiLSTM:
    def __init__(self, name: str, fan_in: int, hidden: int, rng: np.random.Generator) -> None:
        self.forward_cell = LSTM(f"{name}.forward", fan_in, hidden, rng)
        self.backward_cell = LSTM(f"{name}.backward", fan_in, hidden, rng)

    def params(self) -> Dict[str, Tensor]:
        return {**self.forward_cell.params(), **self.backward_cell.params()}

    def __call__(self, x: Tensor, lengths: Sequence[int]) -> Tuple[Tensor, Tensor]:
        """Run both directions over concatenated sequences.

        Returns per-position states ``(sum(lengths), 2 * hidden)`` in row order of
        ``x`` and per-sequence final states ``(len(lengths), 2 * hidden)``.
        """

        forward_rows, backward_rows = _layout(lengths)
        batch = len(lengths)
        forward_states = self.forward_cell.run(x, forward_rows)
        backward_states = self.backward_cell.run(x, backward_rows)

        lengths_arr = np.asarray(lengths, dtype=np.int64)
        sequence = np.repeat(np.arange(batch), lengths_arr)
        position = np.concatenate([np.arange(length) for length in lengths_arr])
        forward_index = position * batch + sequence
        backward_index = (lengths_arr[sequence] - 1 - position) * batch + sequence
        per_position = ag.concat(
            [
                ag.take_rows(forward_states, forward_index),
                ag.take_rows(backward_states, backward_index),
            ],
            axis=1,
        )

        last = (lengths_arr - 1) * batch + np.arange(batch)
        finals = ag.concat(
            [ag.take_rows(forward_states, last), ag.take_rows(backward_states, last)], axis=1
        )
        return per_position, finals
