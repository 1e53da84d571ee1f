"""Coupled-trial Monte Carlo engine.

One trial draws one latent path and evaluates the first-passage time and
every requested stopping rule on it, generating the path chunk by chunk
until all of them have stopped or the horizon cap is reached.

Trial ``i`` of sweep point ``k`` always uses the streams derived from
``(master_seed, k, i)``, and reductions run in trial order with exactly
rounded sums, so results do not depend on how trials are spread over
workers.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import theory
from .errors import ParameterError
from .estimators import (
    DelayedThreshold,
    EstimatorKind,
    FixedTime,
    SequentialMmse,
    SingleObservation,
    delayed_threshold,
    fixed_time_eta,
    mmse_chunk,
    single_observation_eta,
    t_star,
)
from .observation import observe_noisy_chunk
from .process import WalkParams, default_horizon_cap, first_index_at_or_above, sample_first_passage_exact, walk_chunk
from .rng import TrialStreams, check_seed, stream, trial_streams

log = logging.getLogger(__name__)

MODES = ("noisy", "delayed", "diverge")
_MAX_CHUNK = 1 << 16


@dataclass(frozen=True)
class TrialOutcome:
    estimator: str
    tau: int
    eta: int
    overshoot: float
    truncated: bool


@dataclass(frozen=True)
class PrecisionSpec:
    delta: float = 0.05
    n_override: Optional[int] = None

    def __post_init__(self) -> None:
        if not 0.0 < self.delta < 1.0:
            raise ParameterError(f"precision delta must lie in (0, 1), got {self.delta}")
        if self.n_override is not None and self.n_override < 1:
            raise ParameterError(f"trial count must be >= 1, got {self.n_override}")


@dataclass(frozen=True)
class MomentEstimate:
    """Empirical ``E|eta - tau|^p`` over the trials that finished within the cap.

    ``n`` counts all trials run; ``truncated_count`` of them hit the cap and
    are excluded from ``empirical_moment`` and ``stderr``.
    """

    empirical_moment: float
    n: int
    stderr: float
    theory_constant: float
    ratio: float
    truncated_count: int
    estimator: str = ""
    sweep_value: float = 0.0


@dataclass
class ExperimentConfig:
    """One sweep: ``sweep`` holds levels (noisy) or delays (delayed).

    In delayed mode the level at delay ``d`` is ``level_offset + level_slope * d``
    when ``level_slope`` is set, otherwise ``params.ell``.
    """

    mode: str
    params: WalkParams
    estimators: list
    p: float
    sweep: list
    precision: PrecisionSpec = field(default_factory=PrecisionSpec)
    master_seed: int = 0
    workers: int = 1
    level_offset: Optional[float] = None
    level_slope: Optional[float] = None
    horizon_cap: Optional[int] = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.sweep:
            raise ParameterError("the sweep must contain at least one value")
        if not self.estimators:
            raise ParameterError("at least one estimator is required")
        # the driftless results hold for p >= 1/2, the drifting ones for p >= 1
        driftless = self.mode == "diverge" or (self.mode == "delayed" and self.params.s == 0)
        min_p = 0.5 if driftless else 1.0
        if not self.p >= min_p:
            raise ParameterError(f"p must be >= {min_p:g} in {self.mode} mode, got {self.p}")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")
        self.master_seed = check_seed(self.master_seed)
        for kind in self.estimators:
            if self.mode == "delayed" and not isinstance(kind, DelayedThreshold):
                raise ParameterError(f"{kind.name} is not a delayed-observation rule")
            if self.mode == "noisy" and isinstance(kind, DelayedThreshold):
                raise ParameterError("delayed_threshold needs delayed mode")

    def point_params(self, value: float) -> WalkParams:
        """Walk parameters at one sweep value."""
        base = self.params
        if self.mode == "delayed":
            d = int(value)
            if d != value or d < 0:
                raise ParameterError(f"delays must be integers >= 0, got {value}")
            ell = base.ell
            if self.level_slope is not None:
                ell = (self.level_offset or 0.0) + self.level_slope * d
            return WalkParams(s=base.s, ell=ell, epsilon=0.0, delay=d, horizon_cap=self._cap(ell))
        ell = float(value)
        if ell < 0:
            raise ParameterError(f"levels must be >= 0, got {value}")
        return WalkParams(s=base.s, ell=ell, epsilon=base.epsilon, delay=0, horizon_cap=self._cap(ell))

    def _cap(self, ell: float) -> int:
        if self.horizon_cap is not None:
            return self.horizon_cap
        if self.params.s > 0:
            return default_horizon_cap(ell, self.params.s)
        # s = 0: the base params could only be built with an explicit cap
        return self.params.horizon_cap


def required_samples(delta: float, estimator: EstimatorKind, mode: str = "noisy", epsilon: float = 0.5) -> int:
    """Chebyshev trial count for precision ``delta`` with confidence ``1 - delta``.

    ``pi / (2 delta^3)`` for the mmse and single-observation rules and for
    the delayed rule; ``(1 + eps^2)/eps^2 * pi / (2 delta^3)`` for the
    fixed-time rule, whose variance is larger by that factor.
    """
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    base = math.pi / (2.0 * delta ** 3)
    if mode == "noisy" and isinstance(estimator, FixedTime):
        if not epsilon > 0:
            raise ParameterError("fixed-time sample sizing needs epsilon > 0")
        e2 = epsilon * epsilon
        base *= (1.0 + e2) / e2
    return int(math.ceil(base))


def trial_count(config: ExperimentConfig) -> int:
    if config.precision.n_override is not None:
        return int(config.precision.n_override)
    mode = "delayed" if config.mode == "delayed" else "noisy"
    return max(
        required_samples(config.precision.delta, kind, mode, config.params.epsilon)
        for kind in config.estimators
    )


# ---------------------------------------------------------------------------
# single trials


def _chunk_sizes(params: WalkParams):
    if params.s > 0:
        first = int(1.1 * params.ell / params.s) + 64
    else:
        first = 1024
    size = max(64, first)
    while True:
        yield min(size, _MAX_CHUNK)
        size *= 2


def _noisy_trial(params: WalkParams, kinds: Sequence[EstimatorKind], streams: TrialStreams) -> list[TrialOutcome]:
    ell, s, eps, cap = params.ell, params.s, params.epsilon, params.horizon_cap
    need_y = any(isinstance(k, (SequentialMmse, SingleObservation)) for k in kinds)
    need_w = need_y and eps != 0
    results: dict[int, tuple[int, bool]] = {}

    seq_pending = [i for i, k in enumerate(kinds) if isinstance(k, SequentialMmse)]
    single_pending: dict[int, int] = {}
    for i, k in enumerate(kinds):
        if isinstance(k, SingleObservation):
            ts = t_star(ell, s, k.q)
            if ts == 0:
                d = single_observation_eta(params, k.q, 0.0)
                results[i] = (d.eta, d.stopped_by_cap)
            else:
                single_pending[i] = ts
        elif isinstance(k, FixedTime):
            d = fixed_time_eta(ell, s)
            results[i] = (d.eta, False)

    tau, overshoot, tau_trunc = 0, 0.0, False
    tau_pending = ell > 0
    if not tau_pending:
        for i in seq_pending:
            results[i] = (0, False)
        seq_pending = []

    t0, x_last, n_last = 0, 0.0, 0.0
    sizes = _chunk_sizes(params)
    while (tau_pending or seq_pending or single_pending) and t0 < cap:
        m = min(next(sizes), cap - t0)
        x = walk_chunk(x_last, s + streams.v.standard_normal(m))
        if tau_pending:
            i = first_index_at_or_above(x, ell)
            if i >= 0:
                tau, overshoot, tau_pending = t0 + i + 1, float(x[i] - ell), False
        if need_y and (seq_pending or single_pending):
            if need_w:
                noise = walk_chunk(n_last, streams.w.standard_normal(m))
                n_last = float(noise[-1])
            else:
                noise = np.zeros(m)
            y = observe_noisy_chunk(x, noise, eps)
            if seq_pending:
                t = np.arange(t0 + 1, t0 + m + 1, dtype=np.float64)
                i = first_index_at_or_above(mmse_chunk(y, t, s, eps), ell)
                if i >= 0:
                    for j in seq_pending:
                        results[j] = (t0 + i + 1, False)
                    seq_pending = []
            for j, ts in list(single_pending.items()):
                if t0 < ts <= t0 + m:
                    d = single_observation_eta(params, kinds[j].q, float(y[ts - t0 - 1]))
                    results[j] = (d.eta, d.stopped_by_cap)
                    del single_pending[j]
        x_last = float(x[-1])
        t0 += m

    if tau_pending:
        tau, tau_trunc = cap, True
    for j in seq_pending:
        results[j] = (cap, True)
    for j in single_pending:
        results[j] = (cap, True)
    return [
        TrialOutcome(k.name, tau, results[i][0], overshoot, tau_trunc or results[i][1])
        for i, k in enumerate(kinds)
    ]


def _delayed_trial(params: WalkParams, kinds: Sequence[EstimatorKind], streams: TrialStreams) -> list[TrialOutcome]:
    ell, s, d, cap = params.ell, params.s, params.delay, params.horizon_cap
    threshold = delayed_threshold(params)
    # Y_t = 0 for t <= d and X_{t-d} afterwards, so the first t with Y_t >= threshold
    # is 0 when threshold <= 0 and d + (first passage of threshold by X) otherwise.
    eta: Optional[int] = 0 if threshold <= 0 else None
    tau, overshoot = (0, 0.0) if ell <= 0 else (None, 0.0)
    t0, x_last = 0, 0.0
    sizes = _chunk_sizes(params)
    while (tau is None or eta is None) and t0 < cap:
        m = min(next(sizes), cap - t0)
        x = walk_chunk(x_last, s + streams.v.standard_normal(m))
        if eta is None:
            i = first_index_at_or_above(x, threshold)
            if i >= 0:
                eta = t0 + i + 1 + d
        if tau is None:
            i = first_index_at_or_above(x, ell)
            if i >= 0:
                tau, overshoot = t0 + i + 1, float(x[i] - ell)
        x_last = float(x[-1])
        t0 += m
    tau_trunc = tau is None
    if tau is None:
        tau = cap
    eta_cap = eta is None or eta > cap
    if eta_cap:
        eta = cap
    return [TrialOutcome(k.name, tau, eta, overshoot, tau_trunc or eta_cap) for k in kinds]


def run_coupled_trial(
    params: WalkParams,
    estimators: Sequence[EstimatorKind],
    trial_rng: TrialStreams,
) -> list[TrialOutcome]:
    """Simulate one shared path and evaluate tau and every estimator on it."""
    delayed = [isinstance(k, DelayedThreshold) for k in estimators]
    if any(delayed):
        if not all(delayed):
            raise ParameterError("delayed and noisy rules cannot share a trial")
        return _delayed_trial(params, estimators, trial_rng)
    if params.delay != 0:
        raise ParameterError("noisy-observation rules need delay = 0")
    return _noisy_trial(params, estimators, trial_rng)


# ---------------------------------------------------------------------------
# blocks of trials


def _run_block(params, kinds, master_seed, sweep_index, start, stop):
    k = len(kinds)
    n = stop - start
    tau = np.empty(n, dtype=np.int64)
    eta = np.empty((k, n), dtype=np.int64)
    trunc = np.empty((k, n), dtype=bool)
    for j, trial in enumerate(range(start, stop)):
        outs = run_coupled_trial(params, kinds, trial_streams(master_seed, sweep_index, trial))
        tau[j] = outs[0].tau
        for e, o in enumerate(outs):
            eta[e, j] = o.eta
            trunc[e, j] = o.truncated
    return tau, eta, trunc


def _block_bounds(n: int, workers: int) -> list[tuple[int, int]]:
    if workers <= 1:
        return [(0, n)]
    pieces = min(n, workers * 4)
    edges = np.linspace(0, n, pieces + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def simulate_trials(
    params: WalkParams,
    kinds: Sequence[EstimatorKind],
    n: int,
    master_seed: int,
    sweep_index: int = 0,
    workers: int = 1,
):
    """Run trials ``0 .. n-1`` and return ``(tau, eta[k, n], truncated[k, n])`` in trial order."""
    kinds = list(kinds)
    bounds = _block_bounds(n, workers)
    if len(bounds) == 1:
        return _run_block(params, kinds, master_seed, sweep_index, 0, n)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_block, params, kinds, master_seed, sweep_index, a, b) for a, b in bounds]
        parts = [f.result() for f in futures]
    return (
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts], axis=1),
        np.concatenate([p[2] for p in parts], axis=1),
    )


def moment_estimate(
    errors: np.ndarray,
    truncated: np.ndarray,
    p: float,
    theory_constant: float,
    estimator: str = "",
    sweep_value: float = 0.0,
) -> MomentEstimate:
    """Reduce per-trial ``|eta - tau|`` values to a :class:`MomentEstimate`.

    Sums are exactly rounded (``math.fsum``), so the result does not depend
    on the order in which trials were produced.
    """
    errors = np.asarray(errors)
    truncated = np.asarray(truncated, dtype=bool)
    vals = np.abs(errors[~truncated]).astype(np.float64) ** p
    n_used = vals.size
    if n_used:
        mean = math.fsum(vals) / n_used
    else:
        mean = 0.0
    if n_used > 1:
        var = math.fsum((vals - mean) ** 2) / (n_used - 1)
        stderr = math.sqrt(var / n_used)
    else:
        stderr = 0.0
    if theory_constant > 0:
        ratio = mean / theory_constant
    else:
        ratio = 0.0 if mean == 0 else math.inf
    return MomentEstimate(
        empirical_moment=mean,
        n=int(errors.size),
        stderr=stderr,
        theory_constant=theory_constant,
        ratio=ratio,
        truncated_count=int(truncated.sum()),
        estimator=estimator,
        sweep_value=sweep_value,
    )


def theory_constant_for(mode: str, params: WalkParams, p: float) -> float:
    if mode == "noisy":
        return theory.c1(params.ell, params.s, params.epsilon, p)
    if params.s > 0:
        return theory.c2(params.delay, params.s, p)
    return theory.c2_driftless(params.delay, p)


def run_experiment(config: ExperimentConfig, progress=None) -> list[MomentEstimate]:
    """Every sweep point times every estimator, in sweep order then estimator order.

    All parameter checks run before any simulation, so a sweep is either
    complete or raises.
    """
    if config.mode == "diverge":
        raise ParameterError("use run_divergence_demo for the driftless noisy case")
    points = [config.point_params(v) for v in config.sweep]
    constants = [theory_constant_for(config.mode, pp, config.p) for pp in points]
    for pp in points:
        for kind in config.estimators:
            if isinstance(kind, SingleObservation):
                t_star(pp.ell, pp.s, kind.q)
            elif not isinstance(kind, DelayedThreshold) and pp.s <= 0:
                raise ParameterError(f"{kind.name} needs s > 0")
    n = trial_count(config)
    out: list[MomentEstimate] = []
    for k, (value, pp, const) in enumerate(zip(config.sweep, points, constants)):
        log.info("sweep point %d/%d (%s = %g): %d trials", k + 1, len(points), config.mode, value, n)
        tau, eta, trunc = simulate_trials(pp, config.estimators, n, config.master_seed, k, config.workers)
        for e, kind in enumerate(config.estimators):
            out.append(moment_estimate(eta[e] - tau, trunc[e], config.p, const, kind.name, float(value)))
        if progress is not None:
            progress(k + 1, len(points))
    return out


# ---------------------------------------------------------------------------
# first-passage samples, tails and the CLT check


def _tau_block(params, master_seed, sweep_index, start, stop):
    tau = np.empty(stop - start, dtype=np.int64)
    trunc = np.empty(stop - start, dtype=bool)
    ell, s, cap = params.ell, params.s, params.horizon_cap
    for j, trial in enumerate(range(start, stop)):
        if ell <= 0:
            tau[j], trunc[j] = 0, False
            continue
        v = stream(master_seed, sweep_index, trial, 0)
        t0, x_last, found = 0, 0.0, -1
        sizes = _chunk_sizes(params)
        while t0 < cap:
            m = min(next(sizes), cap - t0)
            x = walk_chunk(x_last, s + v.standard_normal(m))
            i = first_index_at_or_above(x, ell)
            if i >= 0:
                found = t0 + i + 1
                break
            x_last = float(x[-1])
            t0 += m
        tau[j], trunc[j] = (found, False) if found >= 0 else (cap, True)
    return tau, trunc


def first_passage_sample(
    params: WalkParams, n: int, master_seed: int, sweep_index: int = 0, workers: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """``n`` first-passage times (and truncation flags) by stepping the walk.

    Uses the same V streams as the coupled engine, so ``tau`` here equals
    the ``tau`` of the coupled trial with the same indices.
    """
    if n < 1:
        raise ParameterError("need at least one trial")
    bounds = _block_bounds(n, workers)
    if len(bounds) == 1:
        return _tau_block(params, master_seed, sweep_index, 0, n)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_tau_block, *zip(*[(params, master_seed, sweep_index, a, b) for a, b in bounds])))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


@dataclass(frozen=True)
class TailRow:
    z: float
    lower_bound: Optional[float]
    lower_empirical: float
    lower_stderr: float
    upper_bound: float
    upper_empirical: float
    upper_stderr: float


def tail_frequencies(tau: np.ndarray, ell: float, s: float, sigma2: float, z_grid: Sequence[float]) -> list[TailRow]:
    """Empirical ``P(tau < ell/s - z)`` and ``P(tau > ell/s + z)`` beside their bounds.

    The lower bound is reported as ``None`` where ``z >= ell/s``.
    """
    tau = np.asarray(tau)
    n = tau.size
    u = ell / s
    rows = []
    for z in sorted(z_grid):
        lo = float(np.count_nonzero(tau < u - z)) / n
        hi = float(np.count_nonzero(tau > u + z)) / n
        lb = theory.lower_tail_bound(ell, s, sigma2, z) if z < u else None
        rows.append(
            TailRow(
                z=float(z),
                lower_bound=lb,
                lower_empirical=lo,
                lower_stderr=math.sqrt(lo * (1 - lo) / n),
                upper_bound=theory.upper_tail_bound(ell, s, sigma2, z),
                upper_empirical=hi,
                upper_stderr=math.sqrt(hi * (1 - hi) / n),
            )
        )
    return rows


def standardize(tau: np.ndarray, ell: float, s: float, sigma2: float = 1.0) -> np.ndarray:
    return np.sqrt(s ** 3 / (sigma2 * ell)) * (np.asarray(tau, dtype=np.float64) - ell / s)


def ks_distance(sample: np.ndarray, cdf=theory.clt_reference_cdf) -> float:
    """Sup-norm distance between the empirical CDF of ``sample`` and ``cdf``.

    Ties are handled: the empirical CDF jumps by the tie multiplicity.
    """
    x = np.sort(np.asarray(sample, dtype=np.float64))
    n = x.size
    if n == 0:
        raise ParameterError("empty sample")
    values, first = np.unique(x, return_index=True)
    counts = np.diff(np.append(first, n))
    after = np.cumsum(counts) / n
    before = after - counts / n
    f = np.array([cdf(v) for v in values])
    return float(max(np.max(np.abs(after - f)), np.max(np.abs(f - before))))


def empirical_cdf_check(params: WalkParams, n: int, master_seed: int = 0, workers: int = 1, sigma2: float = 1.0) -> float:
    """KS distance between standardised first-passage times and the standard normal."""
    if params.s <= 0:
        raise ParameterError("the CLT check needs s > 0")
    if params.ell <= 0:
        raise ParameterError("the CLT check needs ell > 0")
    if n < 1:
        raise ParameterError("empty sample: n must be >= 1")
    tau, trunc = first_passage_sample(params, n, master_seed, 0, workers)
    return ks_distance(standardize(tau, params.ell, params.s, sigma2))


# ---------------------------------------------------------------------------
# driftless noisy case


@dataclass(frozen=True)
class DivergenceRow:
    n: int
    empirical_moment: float
    truncation_rate: float
    median_estimate: float


def run_divergence_demo(
    params: WalkParams,
    p: float,
    n_grid: Sequence[int],
    master_seed: int,
    horizon_cap: Optional[int] = None,
) -> list[DivergenceRow]:
    """Empirical ``E|eta - tau|^p`` for growing trial counts when ``s = 0``.

    The estimator is the constant ``eta = median(tau)`` of the sample at hand.
    Trials that hit the cap enter with ``tau = cap``; they are counted, not
    dropped. Samples are nested: the first ``n`` trials of the largest run.
    """
    cap = horizon_cap
    if cap is None:
        raise ParameterError("the divergence demo needs an explicit horizon cap")
    if params.s != 0:
        raise ParameterError("the divergence demo is for s = 0")
    if not params.epsilon > 0:
        raise ParameterError("the divergence demo needs epsilon > 0")
    if not p >= 0.5:
        raise ParameterError(f"p must be >= 1/2, got {p}")
    if not n_grid or min(n_grid) < 1:
        raise ParameterError("n_grid must hold positive trial counts")
    check_seed(master_seed)
    rng = stream(master_seed, 0, 0, 2)
    tau, trunc = sample_first_passage_exact(params.ell, 0.0, max(n_grid), rng, cap)
    rows = []
    for n in n_grid:
        sample = tau[:n].astype(np.float64)
        med = float(np.median(sample))
        moment = math.fsum(np.abs(sample - med) ** p) / n
        rows.append(DivergenceRow(n=int(n), empirical_moment=moment, truncation_rate=float(trunc[:n].mean()), median_estimate=med))
    return rows
