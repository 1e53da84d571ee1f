import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fptrack.observation import (
    Delayed,
    DelayLine,
    Noisy,
    delayed_observe,
    delayed_stream,
    noisy_observe,
    observe_delayed_chunk,
)
from fptrack.process import walk_chunk
from fptrack.rng import stream


def test_noisy_zero_epsilon_is_identity():
    assert noisy_observe(3.14159, 12.0, 0.0) == 3.14159


def test_noisy_arithmetic():
    assert noisy_observe(5.0, -2.0, 0.5) == 4.0


def test_noisy_variance_grows_linearly():
    eps, t, n = 0.7, 100, 100_000
    w = stream(3, 0, 0, 1).standard_normal((n, t))
    diff = eps * w.sum(axis=1)  # Y_t - X_t
    assert diff.var(ddof=1) == pytest.approx(eps ** 2 * t, rel=0.03)


def test_channel_kinds_validate():
    with pytest.raises(ValueError):
        Noisy(-1.0)
    with pytest.raises(ValueError):
        Delayed(-2)
    assert Delayed(0).d == 0


def test_delayed_zero_prefix():
    line = DelayLine(4)
    for t in range(5):
        line.push(float(t + 10))
        assert delayed_observe(line, t, 4) == 0.0


def test_zero_delay_is_identity():
    xs = [0.0, 1.5, -2.0, 3.0, 4.0, 5.0, 6.0, 7.25]
    ys = dict(delayed_stream(xs, 0))
    assert ys[7] == 7.25
    assert [ys[t] for t in range(1, 8)] == xs[1:]


def test_delay_line_rejects_unavailable_lookups():
    line = DelayLine(3)
    for x in range(6):
        line.push(float(x))
    with pytest.raises(LookupError):
        line.lagged(3)  # only the current step can be served


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.integers(0, 30), length=st.integers(1, 120))
def test_delay_is_a_pure_shift(seed, d, length):
    x = np.concatenate([[0.0], walk_chunk(0.0, 0.5 + np.random.default_rng(seed).standard_normal(length))])
    ring = np.array([y for _, y in delayed_stream(x, d)])
    stored = observe_delayed_chunk(x, d)
    assert np.array_equal(ring, stored)
    assert np.all(stored[: d + 1] == 0.0)
    if length > d:
        assert np.array_equal(stored[d + 1:], x[1: length + 1 - d])
