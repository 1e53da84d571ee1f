"""Observation channels: additive accumulated Gaussian noise, or a pure delay."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

import numpy as np

__all__ = [
    "Noisy",
    "Delayed",
    "ChannelKind",
    "noisy_observe",
    "DelayLine",
    "delayed_observe",
    "observe_noisy_chunk",
    "observe_delayed_chunk",
    "delayed_stream",
]


@dataclass(frozen=True)
class Noisy:
    epsilon: float

    def __post_init__(self) -> None:
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class Delayed:
    d: int

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 0:
            raise ValueError(f"delay must be an integer >= 0, got {self.d}")


ChannelKind = Union[Noisy, Delayed]


def noisy_observe(x_t: float, noise_acc: float, epsilon: float) -> float:
    """``Y_t = X_t + epsilon * sum_{i<=t} W_i``; ``noise_acc`` is that running sum."""
    if epsilon == 0:
        return x_t
    return x_t + epsilon * noise_acc


def observe_noisy_chunk(x: np.ndarray, noise_acc: np.ndarray, epsilon: float) -> np.ndarray:
    """Vectorised :func:`noisy_observe` with identical rounding."""
    if epsilon == 0:
        return np.array(x, dtype=np.float64, copy=True)
    return x + epsilon * noise_acc


class DelayLine:
    """Ring buffer holding the last ``d + 1`` latent values ``X_{t-d} .. X_t``.

    ``push`` must be called once per step with ``X_t`` for ``t = 0, 1, ...``.
    """

    def __init__(self, d: int):
        if d < 0:
            raise ValueError("delay must be >= 0")
        self.d = d
        self._buf: deque[float] = deque(maxlen=d + 1)
        self.t = -1

    def push(self, x_t: float) -> None:
        self._buf.append(x_t)
        self.t += 1

    def lagged(self, t: int) -> float:
        """``X_{t-d}``; only the current step can be served."""
        if t != self.t or len(self._buf) < self.d + 1:
            raise LookupError(f"delay line holds steps up to {self.t}; cannot supply X_{{{t}-{self.d}}}")
        return self._buf[0]


def delayed_observe(path_buffer: DelayLine, t: int, d: int) -> float:
    """``Y_t = 0`` for ``t <= d`` and ``Y_t = X_{t-d}`` afterwards."""
    if d != path_buffer.d:
        raise ValueError(f"buffer delay {path_buffer.d} does not match d={d}")
    if t <= d:
        return 0.0
    return path_buffer.lagged(t)


def delayed_stream(xs: Iterable[float], d: int) -> Iterator[tuple[int, float]]:
    """Yield ``(t, Y_t)`` for a latent path given as ``X_0, X_1, ...``."""
    line = DelayLine(d)
    for t, x in enumerate(xs):
        line.push(float(x))
        yield t, delayed_observe(line, t, d)


def observe_delayed_chunk(x_full: np.ndarray, d: int) -> np.ndarray:
    """Delayed observation of a stored path ``X_0 .. X_T``: zero prefix then shift."""
    x_full = np.asarray(x_full, dtype=np.float64)
    y = np.zeros_like(x_full)
    if x_full.size > d + 1:
        y[d + 1:] = x_full[1: x_full.size - d]
    return y
