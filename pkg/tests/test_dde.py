import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from chemostat_delay import (ChemostatModel, ConfigurationError, History, TimeFunction,
                             UndefinedPsiError, UptakeFunction, compute_psi, compute_y,
                             conservation_defect, integrate, log_growth_identity)
from chemostat_delay.dde import write_csv


def test_no_delay_equilibrium():
    p = UptakeFunction.monod(2, 1)
    m = ChemostatModel(p, TimeFunction.constant(1.0), TimeFunction.constant(0.5), 0.0)
    tr = integrate(m, History.constant(1.0, 0.1, 0.0), 200, 0.01)
    # p(s) = D gives s = 1/3, x = s0 - s
    assert tr.s[-1] == pytest.approx(1 / 3, abs=1e-9)
    assert tr.x[-1] == pytest.approx(2 / 3, abs=1e-9)


def test_delay_equilibrium(const_model, hist1):
    tr = integrate(const_model, hist1, 300, 0.01)
    D, tau = 0.5, 1.0
    # p(s) = D e^{D tau}, x = (s0 - s) e^{-D tau}
    target = D * math.exp(D * tau)
    s_bar = target / (2 - target)
    assert tr.s[-1] == pytest.approx(s_bar, abs=1e-8)
    assert tr.x[-1] == pytest.approx((1 - s_bar) * math.exp(-D * tau), abs=1e-8)
    y = compute_y(tr)
    assert y[-1] == pytest.approx((1 - s_bar) * (1 - math.exp(-D * tau)), abs=1e-6)


def test_first_delay_interval_matches_ode_oracle(const_model):
    # on [0, tau] the delayed terms come from the constant history
    s_h, x_h, tau, D = 0.7, 0.3, 1.0, 0.5
    p = const_model.p
    tr = integrate(const_model, History.constant(s_h, x_h, tau), tau, 0.01)

    def f(t, y):
        s, x = y
        inflow = x_h * p(s_h) * math.exp(-D * tau)
        return [(1 - s) * D - x * p(s), -D * x + inflow]

    sol = solve_ivp(f, (0, tau), [s_h, x_h], rtol=1e-12, atol=1e-14, dense_output=True)
    ref = sol.sol(tr.grid)
    assert np.max(np.abs(tr.after("s") - ref[0])) < 1e-10
    assert np.max(np.abs(tr.after("x") - ref[1])) < 1e-10


def test_second_interval_against_solve_ivp_dense(const_model):
    # oracle: integrate [0, tau] with solve_ivp, then [tau, 2 tau] feeding the dense output
    s_h, x_h, tau, D = 1.0, 0.1, 1.0, 0.5
    p = const_model.p
    tr = integrate(const_model, History.constant(s_h, x_h, tau), 2 * tau, 0.005)
    f1 = lambda t, y: [(1 - y[0]) * D - y[1] * p(y[0]),
                       -D * y[1] + x_h * p(s_h) * math.exp(-D * tau)]
    a = solve_ivp(f1, (0, tau), [s_h, x_h], rtol=1e-12, atol=1e-14, dense_output=True)

    def f2(t, y):
        sd, xd = a.sol(t - tau)
        return [(1 - y[0]) * D - y[1] * p(y[0]), -D * y[1] + xd * p(sd) * math.exp(-D * tau)]

    b = solve_ivp(f2, (tau, 2 * tau), a.y[:, -1], rtol=1e-12, atol=1e-14, dense_output=True)
    g = tr.grid[tr.grid >= tau]
    ref = b.sol(g)
    assert np.max(np.abs(tr.after("x")[tr.grid >= tau] - ref[1])) < 1e-9


def test_step_must_divide_delay(const_model, hist1):
    with pytest.raises(ConfigurationError):
        integrate(const_model, hist1, 10, 0.03)
    with pytest.raises(ConfigurationError):
        integrate(const_model, History.constant(1, 0.1, 2.0), 10, 0.01)


def test_zero_history_stays_zero(const_model):
    tr = integrate(const_model, History.constant(1.0, 0.0, 1.0), 50, 0.01)
    assert np.all(tr.x == 0)
    with pytest.raises(UndefinedPsiError):
        compute_psi(tr)


def test_psi_equilibrium_and_residual(const_model, hist1):
    tr = integrate(const_model, hist1, 200, 0.01)
    ps = compute_psi(tr)
    assert ps.psi[-1] == pytest.approx(math.exp(-0.5), abs=1e-7)
    assert ps.residual < 1e-5
    assert np.all((ps.psi > 0) & (ps.psi <= 1 + 1e-12))


def test_log_growth_identity(const_model, hist1, counter_model):
    tr = integrate(const_model, hist1, 100, 0.01)
    assert log_growth_identity(tr) < 1e-5
    tau = counter_model.tau
    tr = integrate(counter_model, History.constant(1.0, 0.01, tau), 40, tau / 100)
    assert log_growth_identity(tr) < 1e-4


def test_conservation_defect_decays(periodic_model, hist1):
    tr = integrate(periodic_model, hist1, 40, 0.01)
    delta = conservation_defect(tr, z0=3.0)
    I = tr.after("I")
    assert np.max(np.abs(np.abs(delta) - abs(delta[0]) * np.exp(-I))) < 1e-5


def test_csv_round_trip(tmp_path, const_model, hist1):
    tr = integrate(const_model, hist1, 2, 0.1)
    path = tmp_path / "traj.csv"
    tr.to_csv(path)
    data = np.genfromtxt(path, delimiter=",", names=True)
    assert np.array_equal(data["x"], tr.after("x"))  # 17 digits round-trip exactly
    write_csv(tmp_path / "mixed.csv", {"v": [1.0, 2.0], "verdict": ["a", "b"]})
    assert (tmp_path / "mixed.csv").read_text().splitlines()[1] == "1,a"


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 3), st.floats(0.2, 2), st.floats(0.5, 2), st.floats(0.1, 1.0),
       st.integers(0, 3), st.floats(0.01, 1))
def test_nonnegativity(m, a, s0, D, k, x0):
    tau = 0.5 * k
    model = ChemostatModel(UptakeFunction.monod(m, a), TimeFunction.constant(s0),
                           TimeFunction.sampled(lambda t: D * (1 + 0.5 * np.sin(t)), 2 * math.pi), tau)
    tr = integrate(model, History.constant(s0, x0, tau), 30, 0.05)
    assert np.all(tr.s >= 0) and np.all(tr.x >= 0)
