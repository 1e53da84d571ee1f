"""Stopping rules that estimate the first-passage time from observations only.

Four rules are provided:

* :class:`SequentialMmse` stops the first time the running mmse estimate of
  ``X_t`` given ``Y_t`` reaches the level.
* :class:`SingleObservation` looks once at ``t_star = floor(ell/s - (ell/s)**q)``
  and extrapolates the remaining distance at rate ``s``.
* :class:`FixedTime` ignores the observations and answers ``round(ell / s)``.
* :class:`DelayedThreshold` stops when the delayed observation reaches
  ``ell - s * d``.

Each rule has a streaming form fed with ``(t, y_t)`` pairs, which is the
reference definition, and the Monte Carlo engine uses the chunked helpers
at the bottom of this module.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .errors import ParameterError
from .process import WalkParams

__all__ = [
    "SequentialMmse",
    "SingleObservation",
    "FixedTime",
    "DelayedThreshold",
    "EstimatorKind",
    "StopDecision",
    "DEFAULT_Q",
    "mmse_estimate",
    "mmse_chunk",
    "run_sequential_mmse",
    "t_star",
    "single_observation_eta",
    "fixed_time_eta",
    "delayed_threshold",
    "delayed_eta",
    "estimator_from_name",
]

DEFAULT_Q = 0.51


@dataclass(frozen=True)
class SequentialMmse:
    name = "sequential_mmse"


@dataclass(frozen=True)
class SingleObservation:
    q: float = DEFAULT_Q
    name = "single_observation"

    def __post_init__(self) -> None:
        if not 0.5 < self.q < 1.0:
            raise ParameterError(f"q must lie strictly between 1/2 and 1, got {self.q}")


@dataclass(frozen=True)
class FixedTime:
    name = "fixed_time"


@dataclass(frozen=True)
class DelayedThreshold:
    name = "delayed_threshold"


EstimatorKind = Union[SequentialMmse, SingleObservation, FixedTime, DelayedThreshold]

NOISY_KINDS = (SequentialMmse, SingleObservation, FixedTime)


def estimator_from_name(name: str, q: float = DEFAULT_Q) -> EstimatorKind:
    table = {
        "sequential_mmse": SequentialMmse,
        "fixed_time": FixedTime,
        "delayed_threshold": DelayedThreshold,
    }
    if name == "single_observation":
        return SingleObservation(q)
    try:
        return table[name]()
    except KeyError:
        raise ParameterError(f"unknown estimator {name!r}") from None


@dataclass(frozen=True)
class StopDecision:
    eta: int
    stopped_by_cap: bool = False


def _capped(eta: int, cap: int) -> StopDecision:
    if eta > cap:
        return StopDecision(eta=cap, stopped_by_cap=True)
    return StopDecision(eta=eta)


def mmse_estimate(y_t: float, t: int, s: float, epsilon: float) -> float:
    """Conditional mean of ``X_t`` given ``Y_t`` for ``t >= 1``."""
    if epsilon == 0:
        return y_t
    e2 = epsilon * epsilon
    a = 1.0 + e2
    return y_t / a + (s * e2 * t) / a


def mmse_chunk(y: np.ndarray, t: np.ndarray, s: float, epsilon: float) -> np.ndarray:
    """Vectorised :func:`mmse_estimate` (same operation order, same rounding)."""
    if epsilon == 0:
        return np.array(y, dtype=np.float64, copy=True)
    e2 = epsilon * epsilon
    a = 1.0 + e2
    return y / a + (s * e2 * t) / a


def _require_noisy(params: WalkParams) -> None:
    if params.delay != 0:
        raise ParameterError("this rule needs the noisy observation mode (delay = 0)")
    if params.s <= 0:
        raise ParameterError("this rule needs a strictly positive drift s")


def run_sequential_mmse(params: WalkParams, observations: Iterable[tuple[int, float]]) -> StopDecision:
    """First ``t`` with ``Xhat_t >= ell`` where ``Xhat_0 = 0``.

    ``observations`` yields ``(t, Y_t)``; entries with ``t = 0`` are ignored.
    Running out of observations, or passing the horizon cap, is a cap stop.
    """
    _require_noisy(params)
    if 0.0 >= params.ell:
        return StopDecision(eta=0)
    cap = params.horizon_cap
    for t, y in observations:
        if t == 0:
            continue
        if t > cap:
            break
        if mmse_estimate(y, t, params.s, params.epsilon) >= params.ell:
            return StopDecision(eta=t)
    return StopDecision(eta=cap, stopped_by_cap=True)


def t_star(ell: float, s: float, q: float = DEFAULT_Q) -> int:
    """``floor(ell/s - (ell/s)**q)``, defined for ``ell / s >= 1``."""
    if not 0.5 < q < 1.0:
        raise ParameterError(f"q must lie strictly between 1/2 and 1, got {q}")
    if s <= 0:
        raise ParameterError("t_star needs a strictly positive drift s")
    u = ell / s
    if u < 1.0:
        raise ParameterError(
            f"the single-observation rule needs ell/s >= 1 (got ell/s = {u:g}); "
            "t_star would be negative"
        )
    return int(math.floor(u - u ** q))


def single_observation_eta(params: WalkParams, q: float, y_at_tstar: float) -> StopDecision:
    """``t_star + floor((ell - Xhat_{t_star})_+ / s)`` from the one observation ``Y_{t_star}``."""
    _require_noisy(params)
    ts = t_star(params.ell, params.s, q)
    xhat = 0.0 if ts == 0 else mmse_estimate(y_at_tstar, ts, params.s, params.epsilon)
    remaining = max(0.0, params.ell - xhat)
    return _capped(ts + int(math.floor(remaining / params.s)), params.horizon_cap)


def fixed_time_eta(ell: float, s: float) -> StopDecision:
    """``ell / s`` rounded to the nearest integer, halves rounded up."""
    if s <= 0:
        raise ParameterError("the fixed-time rule needs a strictly positive drift s")
    return StopDecision(eta=int(math.floor(ell / s + 0.5)))


def delayed_threshold(params: WalkParams) -> float:
    """Effective level ``ell - s * d`` seen through the delay."""
    if params.ell < params.s * params.delay:
        warnings.warn(
            f"ell = {params.ell:g} < s*d = {params.s * params.delay:g}: the large-delay "
            "optimality result assumes ell >= s*d",
            RuntimeWarning,
            stacklevel=3,
        )
    return params.ell - params.s * params.delay


def delayed_eta(params: WalkParams, observations: Iterable[tuple[int, float]]) -> StopDecision:
    """First ``t >= 0`` with ``Y_t >= ell - s*d`` on the delayed observation stream."""
    if params.epsilon != 0:
        raise ParameterError("the delayed-threshold rule needs the delayed observation mode (epsilon = 0)")
    threshold = delayed_threshold(params)
    cap = params.horizon_cap
    for t, y in observations:
        if t > cap:
            break
        if y >= threshold:
            return StopDecision(eta=t)
    return StopDecision(eta=cap, stopped_by_cap=True)
