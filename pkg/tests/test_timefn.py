import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chemostat_delay import DomainError, TimeFunction
from chemostat_delay.timefn import average, cumulative_simpson, integrate, simpson

W = 2 * math.pi
ONE_MINUS_SIN = TimeFunction.sampled(lambda t: 1 - np.sin(t), W)


def test_constant_eval():
    assert TimeFunction.constant(2.0)(17.3) == 2.0


def test_periodic_eval_at_zero_of_one_minus_sin():
    assert ONE_MINUS_SIN(math.pi / 2) == pytest.approx(0.0, abs=1e-15)


def test_tabulated_midpoint():
    assert TimeFunction.tabulated([0, 1], [0, 2])(0.5) == 1.0


def test_tabulated_out_of_domain():
    f = TimeFunction.tabulated([0, 1], [0, 2])
    with pytest.raises(DomainError):
        f(1.5)
    assert TimeFunction.tabulated([0, 1], [0, 2], "hold")(5.0) == 2.0


@pytest.mark.parametrize("bad", [
    lambda: TimeFunction.constant(-1.0),
    lambda: TimeFunction.periodic(0.0, [1, 2]),
    lambda: TimeFunction.periodic(1.0, [1, -2]),
    lambda: TimeFunction.tabulated([0, 0], [1, 2]),
    lambda: TimeFunction.tabulated([0, 1], [1, 2], "linear"),
])
def test_invalid_construction(bad):
    with pytest.raises(DomainError):
        bad()


def test_immutable():
    f = TimeFunction.constant(1.0)
    with pytest.raises(AttributeError):
        f.value = 2.0
    g = TimeFunction.periodic(1.0, [1.0, 2.0])
    with pytest.raises(ValueError):
        g.values[0] = 5.0


def test_integrals():
    tol = 1e-8
    assert integrate(TimeFunction.constant(1.0), 0, W, tol) == pytest.approx(W, abs=tol)
    assert integrate(ONE_MINUS_SIN, 0, W, tol) == pytest.approx(W, abs=1e-7)


def test_weighted_rate_integral_above_642():
    v = simpson(lambda t: math.pi * np.exp(-math.pi / 2 + np.sin(t) - np.cos(t)), 0, W, 1e-8)
    assert v > 6.42
    # high-precision oracle (mpmath quad, 30 digits)
    assert v == pytest.approx(6.426230809089641, abs=1e-8)


def test_average():
    assert average(TimeFunction.constant(3.0), 5.0) == pytest.approx(3.0)
    assert ONE_MINUS_SIN.average() == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(DomainError):
        average(ONE_MINUS_SIN, 0.0)


def test_simpson_rejects_reversed_bounds():
    with pytest.raises(DomainError):
        simpson(np.sin, 1.0, 0.0)
    assert simpson(np.sin, 1.0, 1.0) == 0.0


def test_simpson_error_estimate():
    v, err = simpson(np.exp, 0.0, 1.0, 1e-12, full_output=True)
    assert err <= 1e-12
    assert v == pytest.approx(math.e - 1, abs=1e-12)


def test_cumulative_simpson_matches_antiderivative():
    out = cumulative_simpson(np.cos, 0.0, 0.01, 500)
    t = 0.01 * np.arange(501)
    assert np.max(np.abs(out - np.sin(t))) < 1e-10


def test_scaled_and_to_dict():
    f = ONE_MINUS_SIN.scaled(2.0)
    assert f(0.0) == pytest.approx(2.0)
    d = TimeFunction.tabulated([0, 1], [1, 2], "hold").to_dict()
    assert d == {"kind": "table", "t": [0.0, 1.0], "v": [1.0, 2.0], "extrapolation": "hold"}


# ---------------------------------------------------------------------- properties
signals = st.one_of(
    st.floats(0, 10).map(TimeFunction.constant),
    st.tuples(st.floats(0.1, 20), st.lists(st.floats(0, 5), min_size=2, max_size=40)).map(
        lambda a: TimeFunction.periodic(*a)),
    st.lists(st.floats(0, 5), min_size=2, max_size=30).map(
        lambda v: TimeFunction.tabulated(np.arange(len(v), dtype=float), v, "hold")),
)


@settings(max_examples=60, deadline=None)
@given(signals, st.integers(0, 2 ** 32 - 1))
def test_eval_nonnegative(f, seed):
    t = np.random.default_rng(seed).uniform(-1e3, 1e3, 10_000)
    assert np.all(f(t) >= 0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 20), st.lists(st.floats(0, 5), min_size=2, max_size=40),
       st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=20))
def test_periodic_shift_exact(period, samples, ts):
    f = TimeFunction.periodic(period, samples)
    t = np.array(ts)
    d = np.abs(f(t) - f(t + period))
    # exact up to the rounding of t + period itself
    assert np.all(d <= 1e-12 * max(1.0, max(samples)) * (1 + np.abs(t) / period))


@settings(max_examples=40, deadline=None)
@given(signals, st.floats(-50, 50), st.floats(0, 30), st.floats(0, 30))
def test_integral_additive(f, a, l1, l2):
    tol = 1e-8
    b, c = a + l1, a + l1 + l2
    lhs = integrate(f, a, b, tol) + integrate(f, b, c, tol)
    assert abs(lhs - integrate(f, a, c, tol)) <= 2 * tol + 1e-12 * abs(lhs)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=8, max_size=8),
       st.lists(st.floats(0, 5), min_size=8, max_size=8))
def test_average_linear(u, v):
    tol = 1e-8
    f, g = TimeFunction.periodic(3.0, u), TimeFunction.periodic(3.0, v)
    fg = TimeFunction.periodic(3.0, np.add(u, v))
    assert abs(average(fg, 3.0, tol) - average(f, 3.0, tol) - average(g, 3.0, tol)) <= 2 * tol
