import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chemostat_delay import (ChemostatModel, DomainError, History, TimeFunction, UptakeFunction,
                             is_non_null)
from chemostat_delay.model import uptake_eval


def test_monod_values():
    p = UptakeFunction.monod(2.0, 1.0)
    assert p(0.0) == 0.0
    assert p(1.0) == 1.0
    assert p.derivative(0.0) == pytest.approx(2.0)


@pytest.mark.parametrize("m, a", [(0, 1), (1, 0), (-1, 1)])
def test_monod_rejects_nonpositive(m, a):
    with pytest.raises(DomainError):
        UptakeFunction.monod(m, a)


def test_uptake_negative_argument():
    with pytest.raises(DomainError):
        uptake_eval(UptakeFunction.monod(1, 1), -0.1)


def test_table_uptake():
    p = UptakeFunction.tabulated([0, 1, 2], [0, 1, 1.5])
    assert p(0.5) == 0.5
    assert p(3.0) == pytest.approx(2.0)  # last slope continues
    with pytest.raises(DomainError):
        UptakeFunction.tabulated([0, 1, 2], [0, 1, 1])
    with pytest.raises(DomainError):
        UptakeFunction.tabulated([0.1, 1], [0, 1])


def test_model_validation():
    c = TimeFunction.constant(1.0)
    with pytest.raises(DomainError):
        ChemostatModel(UptakeFunction.monod(1, 1), c, c, -1.0)
    m = ChemostatModel(UptakeFunction.monod(1, 1), c, c, 1.0)
    assert m.is_constant
    assert m.with_(tau=2.0).tau == 2.0


def test_D_extended_backward_convention():
    p = UptakeFunction.monod(1, 1)
    table = TimeFunction.tabulated([0, 10], [1, 2])
    m = ChemostatModel(p, TimeFunction.constant(1.0), table, 1.0)
    assert np.allclose(m.D_extended(np.array([-1.0, -0.5, 5.0])), [1.0, 1.0, 1.5])
    assert m.D_integral(-1.0, 1.0) == pytest.approx(1.0 + 1.05)


def test_history_validation():
    with pytest.raises(DomainError):
        History([-1, 0], [1, -1], [1, 1])
    with pytest.raises(DomainError):
        History([-1, -0.5], [1, 1], [1, 1])
    h = History.constant(1.0, 0.1, 2.0)
    assert h.tau == 2.0
    with pytest.raises(DomainError):
        h.s_at(-3.0)


@pytest.mark.parametrize("t, s, x, expected", [
    ([-1, 0], [0, 0], [0, 0.1], True),                 # x(0) > 0
    ([-1, 0], [1, 1], [0, 0], False),                  # no organisms
    ([-1, -0.5, 0], [1, 0, 0], [0, 1, 0], True),       # overlap inside the first segment
    ([-1, 0], [1, 0], [0, 0], False),
    ([-2, -1, 0], [1, 0, 0], [1, 0, 0], True),         # at a knot
    ([-2, -1, 0], [0, 1, 0], [1, 0, 0], True),         # segment interior only
])
def test_is_non_null(t, s, x, expected):
    assert is_non_null(History(t, s, x)) is expected


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 2), st.floats(0, 2)), min_size=2, max_size=8))
def test_is_non_null_matches_dense_scan(pairs):
    s = np.array([p[0] for p in pairs])
    x = np.array([p[1] for p in pairs])
    t = np.linspace(-1, 0, len(pairs))
    h = History(t, s, x)
    dense = np.linspace(-1, 0, 20001)
    expected = h.x[-1] > 0 or bool(np.any((h.s_at(dense) > 0) & (h.x_at(dense) > 0)))
    assert is_non_null(h) == expected


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 10), st.floats(0.01, 10), st.lists(st.floats(0, 100), min_size=2))
def test_monod_monotone(m, a, s):
    s = np.sort(np.unique(s))
    v = UptakeFunction.monod(m, a)(s)
    assert np.all(np.diff(v) >= 0)
    wide = np.diff(s) > 1e-6 * (1 + s[1:])
    assert np.all(np.diff(v)[wide] > 0)
