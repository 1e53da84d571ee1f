import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fptrack.errors import ParameterError
from fptrack.process import (
    PathState,
    WalkParams,
    advance,
    default_horizon_cap,
    sample_first_passage_exact,
    simulate_first_passage,
)
from fptrack.rng import stream
from fptrack.montecarlo import first_passage_sample, run_coupled_trial
from fptrack.estimators import FixedTime
from fptrack.rng import trial_streams


def test_advance_zero_noise_is_drift():
    st1 = advance(PathState(), WalkParams(s=1, ell=10), v=0.0)
    assert st1.t == 1 and st1.x == 1.0


def test_advance_all_zero_draws():
    st1 = advance(PathState(), WalkParams(s=0, ell=1, epsilon=1, horizon_cap=10), v=0.0, w=0.0)
    assert (st1.x, st1.y) == (0.0, 0.0)


def test_advance_accumulates_recorded_draws():
    rng = np.random.default_rng(5)
    params = WalkParams(s=0.7, ell=1e9, epsilon=0.3)
    log = rng.standard_normal((500, 2))
    state = PathState()
    for v, w in log:
        state = advance(state, params, v, w)
    expected_x = math.fsum([0.7 * 500] + list(log[:, 0]))
    expected_y = expected_x + 0.3 * math.fsum(log[:, 1])
    assert state.t == 500
    assert state.x == pytest.approx(expected_x, rel=1e-12)
    assert state.y == pytest.approx(expected_y, rel=1e-12)


def test_advance_delayed_mode_leaves_y_equal_x():
    state = advance(PathState(), WalkParams(s=1, ell=5, delay=3), v=0.25, w=9.0)
    assert state.y == state.x == 1.25


def test_walkparams_validation():
    with pytest.raises(ParameterError):
        WalkParams(s=-1, ell=1)
    with pytest.raises(ParameterError):
        WalkParams(s=1, ell=1, epsilon=0.5, delay=2)
    with pytest.raises(ParameterError):
        WalkParams(s=0, ell=1)  # cap mandatory without drift
    assert WalkParams(s=10, ell=1000).horizon_cap == 1000
    assert WalkParams(s=1, ell=1000).horizon_cap == 10_000
    assert default_horizon_cap(1, 3) == 1000


def test_first_passage_at_zero_level():
    fp = simulate_first_passage(WalkParams(s=1, ell=0), np.zeros(1000))
    assert (fp.tau, fp.overshoot, fp.truncated) == (0, 0.0, False)


def test_first_passage_deterministic_path():
    fp = simulate_first_passage(WalkParams(s=1, ell=3.5), np.zeros(1000))
    assert fp.tau == 4
    assert fp.overshoot == pytest.approx(0.5)


def test_first_passage_exact_level_counts_as_crossing():
    fp = simulate_first_passage(WalkParams(s=1, ell=3.0), np.zeros(1000))
    assert fp.tau == 3 and fp.overshoot == 0.0


def test_truncation_is_flagged():
    params = WalkParams(s=0, ell=5, horizon_cap=50)
    fp = simulate_first_passage(params, np.full(50, -1.0))
    assert fp.truncated and fp.tau == 50


def test_simulate_needs_enough_draws():
    with pytest.raises(ParameterError):
        simulate_first_passage(WalkParams(s=1, ell=5, horizon_cap=100), np.zeros(10))


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    ell=st.floats(0, 60),
    extra=st.floats(0, 60),
    s=st.floats(0.1, 3),
)
def test_monotone_in_level(seed, ell, extra, s):
    draws = np.random.default_rng(seed).standard_normal(2000)
    a = simulate_first_passage(WalkParams(s=s, ell=ell, horizon_cap=2000), draws)
    b = simulate_first_passage(WalkParams(s=s, ell=ell + extra, horizon_cap=2000), draws)
    assert b.tau >= a.tau


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), ell=st.floats(0.1, 50), s=st.floats(0.1, 3))
def test_first_passage_definition(seed, ell, s):
    draws = np.random.default_rng(seed).standard_normal(3000)
    params = WalkParams(s=s, ell=ell, horizon_cap=3000)
    fp = simulate_first_passage(params, draws)
    # step-by-step reference
    state = PathState()
    for v in draws:
        state = advance(state, params, v)
        if state.x >= ell:
            break
    assert not fp.truncated
    assert fp.tau == state.t
    assert fp.overshoot == state.x - ell >= 0


def test_path_reproducible():
    params = WalkParams(s=2, ell=40)
    d1 = stream(11, 0, 3, 0).standard_normal(params.horizon_cap)
    d2 = stream(11, 0, 3, 0).standard_normal(params.horizon_cap)
    assert simulate_first_passage(params, d1) == simulate_first_passage(params, d2)


@pytest.mark.slow
def test_mean_first_passage_by_wald():
    # Wald: E X_tau = s E tau, i.e. E tau = (ell + E overshoot) / s
    params = WalkParams(s=10, ell=1000)
    n = 100_000
    tau = np.empty(n)
    over = np.empty(n)
    for i in range(n):
        out = run_coupled_trial(params, [FixedTime()], trial_streams(2024, 0, i))[0]
        tau[i], over[i] = out.tau, out.overshoot
    diff = tau - (params.ell + over) / params.s
    assert abs(diff.mean()) <= 3 * diff.std(ddof=1) / math.sqrt(n)
    assert abs(tau.mean() - params.ell / params.s) < 1.0


def test_truncation_rate_small_at_eight_times_mean():
    params = WalkParams(s=10, ell=1000, horizon_cap=800)
    tau, trunc = first_passage_sample(params, 20_000, master_seed=9)
    assert trunc.sum() == 0
    assert tau.max() < 800


@pytest.mark.parametrize("s,ell,cap", [(1.0, 30.0, 5000), (0.0, 3.0, 2000), (10.0, 1000.0, 2000)])
def test_exact_sampler_matches_stepping(s, ell, cap):
    n = 20_000
    stepped, trunc_a = first_passage_sample(WalkParams(s=s, ell=ell, horizon_cap=cap), n, master_seed=77)
    fast, trunc_b = sample_first_passage_exact(ell, s, n, stream(78, 0, 0, 0), cap)
    assert stats.ks_2samp(stepped, fast).pvalue > 1e-3
    assert abs(trunc_a.mean() - trunc_b.mean()) < 4 * math.sqrt(max(trunc_a.mean(), 1e-4) / n) + 1e-3


def test_exact_sampler_zero_level():
    tau, trunc = sample_first_passage_exact(0.0, 0.0, 10, np.random.default_rng(0), 100)
    assert (tau == 0).all() and not trunc.any()


def test_exact_sampler_with_variance_scaling():
    # variance sigma2 walk == unit walk with drift s/sigma and level ell/sigma
    n = 20_000
    a, _ = sample_first_passage_exact(20.0, 2.0, n, np.random.default_rng(1), 10_000, sigma2=4.0)
    b, _ = sample_first_passage_exact(10.0, 1.0, n, np.random.default_rng(2), 10_000)
    assert stats.ks_2samp(a, b).pvalue > 1e-3
