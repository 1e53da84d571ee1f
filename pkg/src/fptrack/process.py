"""Latent drifting Gaussian random walk and its first passage of a level.

The walk is ``X_0 = 0``, ``X_t = X_{t-1} + s + V_t`` with ``V_t ~ N(0, 1)``.
The first-passage time is ``tau = inf{t >= 0 : X_t >= ell}``.

Accumulation order is fixed everywhere as ``x + (s + v)`` so the step-by-step
path (:func:`advance`) and the vectorised path (:func:`walk_chunk`) agree bit
for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterError

__all__ = [
    "WalkParams",
    "PathState",
    "FirstPassage",
    "default_horizon_cap",
    "advance",
    "walk_chunk",
    "first_index_at_or_above",
    "simulate_first_passage",
    "sample_first_passage_exact",
]

MIN_HORIZON_CAP = 1000


def default_horizon_cap(ell: float, s: float) -> int:
    """Default cap ``max(10 * ceil(ell / s), 1000)``; undefined for ``s = 0``."""
    if s <= 0:
        raise ParameterError("a horizon cap must be given explicitly when the drift s is 0")
    return max(10 * math.ceil(ell / s), MIN_HORIZON_CAP)


@dataclass(frozen=True)
class WalkParams:
    """Full parameterisation of one experiment point.

    Exactly one observation mode is active: noisy (``delay == 0``) or
    delayed (``epsilon == 0``). When both are zero the observation is
    the identity and either reading is valid.
    """

    s: float
    ell: float
    epsilon: float = 0.0
    delay: int = 0
    horizon_cap: Optional[int] = None

    def __post_init__(self) -> None:
        if not (self.s >= 0 and math.isfinite(self.s)):
            raise ParameterError(f"drift s must be finite and >= 0, got {self.s}")
        if not (self.ell >= 0 and math.isfinite(self.ell)):
            raise ParameterError(f"level ell must be finite and >= 0, got {self.ell}")
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ParameterError(f"noise scale epsilon must be finite and >= 0, got {self.epsilon}")
        if int(self.delay) != self.delay or self.delay < 0:
            raise ParameterError(f"delay must be an integer >= 0, got {self.delay}")
        if self.epsilon > 0 and self.delay > 0:
            raise ParameterError("noisy and delayed observation cannot be combined")
        cap = self.horizon_cap
        if cap is None:
            object.__setattr__(self, "horizon_cap", default_horizon_cap(self.ell, self.s))
        elif int(cap) != cap or cap < 1:
            raise ParameterError(f"horizon_cap must be an integer >= 1, got {cap}")
        object.__setattr__(self, "delay", int(self.delay))
        object.__setattr__(self, "horizon_cap", int(self.horizon_cap))

    @property
    def mode(self) -> str:
        return "delayed" if self.delay > 0 else "noisy"

    def with_(self, **changes) -> "WalkParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class PathState:
    """Walk state at step ``t``; ``noise`` is the running sum of the W draws."""

    t: int = 0
    x: float = 0.0
    y: float = 0.0
    noise: float = 0.0


@dataclass(frozen=True)
class FirstPassage:
    tau: int
    overshoot: float
    truncated: bool = False


def advance(state: PathState, params: WalkParams, v: float, w: float = 0.0) -> PathState:
    """One step of the latent walk and, in noisy mode, of the observation.

    In delayed mode ``y`` mirrors ``x``; the delay itself is applied by the
    observation channel.
    """
    x = state.x + (params.s + v)
    if params.mode == "noisy":
        noise = state.noise + w
        y = x + params.epsilon * noise
    else:
        noise = state.noise
        y = x
    return PathState(t=state.t + 1, x=x, y=y, noise=noise)


def walk_chunk(x0: float, increments: np.ndarray) -> np.ndarray:
    """Positions after each increment, accumulated left to right from ``x0``."""
    inc = np.array(increments, dtype=np.float64, copy=True)
    if inc.size:
        inc[0] = x0 + inc[0]
    return np.cumsum(inc)


def first_index_at_or_above(values: np.ndarray, level: float) -> int:
    """Index of the first entry ``>= level``, or ``-1`` if there is none."""
    hit = values >= level
    i = int(np.argmax(hit)) if hit.size else 0
    return i if hit.size and hit[i] else -1


def simulate_first_passage(params: WalkParams, draws: Sequence[float]) -> FirstPassage:
    """First passage of ``params.ell`` along the path driven by ``draws``.

    ``draws`` supplies the V increments one per step; at most
    ``horizon_cap`` of them are used. When no crossing happens within the
    cap the result has ``truncated=True`` and ``tau == horizon_cap``.
    """
    if params.ell <= 0:
        return FirstPassage(tau=0, overshoot=0.0)
    cap = params.horizon_cap
    v = np.asarray(draws, dtype=np.float64)[:cap]
    if v.size < cap:
        raise ParameterError(f"need at least horizon_cap={cap} draws, got {v.size}")
    x = walk_chunk(0.0, params.s + v)
    i = first_index_at_or_above(x, params.ell)
    if i < 0:
        return FirstPassage(tau=cap, overshoot=0.0, truncated=True)
    return FirstPassage(tau=i + 1, overshoot=float(x[i] - params.ell))


def sample_first_passage_exact(
    ell: float,
    s: float,
    n: int,
    rng: np.random.Generator,
    horizon_cap: int,
    sigma2: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` independent first-passage times without stepping the walk.

    The walk is embedded in a Brownian motion with drift ``s`` observed at
    integer times. Starting below the level, the continuous hitting time is
    sampled directly (inverse Gaussian, or Levy when ``s = 0``); the walk is
    then inspected at the next integer time, where it is ``ell`` plus a fresh
    Brownian increment. If that value is below the level the procedure
    restarts from there. The walk cannot cross before the continuous path
    does, so the result is exact in distribution; each restart succeeds with
    probability at least 1/2.

    Returns ``(tau, truncated)``; truncated entries have ``tau == horizon_cap``.
    """
    sd = math.sqrt(sigma2)
    tau = np.zeros(n, dtype=np.int64)
    truncated = np.zeros(n, dtype=bool)
    if ell <= 0 or n == 0:
        return tau, truncated
    t = np.zeros(n, dtype=np.int64)
    x = np.zeros(n, dtype=np.float64)
    active = np.arange(n)
    while active.size:
        gap = (ell - x[active]) / sd
        if s > 0:
            drift = s / sd
            hit = rng.wald(gap / drift, gap * gap)
        else:
            z = rng.standard_normal(active.size)
            with np.errstate(divide="ignore"):
                hit = (gap / z) ** 2
        # hit is in units of steps; it is a continuous time from the current integer time
        with np.errstate(invalid="ignore"):
            whole = np.where(np.isfinite(hit), np.ceil(np.minimum(hit, 4.0 * horizon_cap)), np.inf)
            frac = whole - hit
        t_next = t[active] + np.where(np.isfinite(whole), whole, horizon_cap + 1).astype(np.int64)
        over_cap = t_next > horizon_cap
        idx_cap = active[over_cap]
        tau[idx_cap] = horizon_cap
        truncated[idx_cap] = True
        keep = ~over_cap
        active, frac, t_next = active[keep], frac[keep], t_next[keep]
        x_next = ell + s * frac + sd * np.sqrt(frac) * rng.standard_normal(active.size)
        done = x_next >= ell
        tau[active[done]] = t_next[done]
        still = ~done
        t[active[still]] = t_next[still]
        x[active[still]] = x_next[still]
        active = active[still]
    return tau, truncated
