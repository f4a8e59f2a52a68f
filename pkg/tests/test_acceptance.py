"""Acceptance suite: one test per criterion, with a PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary lists
the verdicts.  ``python tests/test_acceptance.py`` prints them directly.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
from scipy.special import lambertw

sys.path.insert(0, str(Path(__file__).parent))

from chemostat_delay import (ChemostatModel, History, TimeFunction, UptakeFunction,  # noqa: E402
                             check_constant, check_necessary_exp, check_periodic,
                             classify_trajectory, conservation_defect, compute_y, integrate,
                             periodic_washout, phi_constant, phi_periodic, phi_transient)
from chemostat_delay.cli import counterexample_integral, counterexample_model  # noqa: E402
from chemostat_delay.config import load_config  # noqa: E402
from chemostat_delay.criteria import NOT_PERSISTENT, PERSISTENT  # noqa: E402
from chemostat_delay.washout import residual_series  # noqa: E402

from battery import BATTERY, battery_history  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = sorted((ROOT / "scenarios").glob("*.json"))
W = 2 * math.pi

# oracles: 30-digit mpmath quadrature and Lambert W
QUAD_ORACLE = 6.426230809089641
PHI_ORACLE = 0.2673358505761654
D_STAR = float(lambertw(0.5).real)  # 0.35173371124919584


def test_01_weighted_rate_quadrature():
    t0 = time.perf_counter()
    v = counterexample_integral(tol=1e-8)
    elapsed = time.perf_counter() - t0
    assert v > 6.42
    assert 6.42 <= v <= 6.44
    assert abs(v - QUAD_ORACLE) < 1e-8
    assert elapsed < 1.0


def test_02_constant_phi():
    a = math.pi * math.pi / 2
    phi = phi_constant(math.pi, math.pi / 2)
    assert phi < 0.3
    assert abs(phi - math.exp(-a * phi)) < 1e-12
    assert abs(phi - float(lambertw(a).real) / a) < 1e-12
    assert abs(phi - PHI_ORACLE) < 1e-12
    m = ChemostatModel(UptakeFunction.monod(W, 1.0), TimeFunction.constant(1.0),
                       TimeFunction.constant(1.0), math.pi / 2)
    dyn, _, _ = phi_transient(m, t_end=60.0, h=math.pi / 200)
    assert abs(dyn.phi[-1] - phi) < 1e-4


def test_03_counterexample_chain():
    t0 = time.perf_counter()
    model = counterexample_model()
    rep = check_periodic(model, W)
    assert rep.margin < -0.1
    assert rep.verdict == NOT_PERSISTENT
    z = periodic_washout(model, W)
    nec = check_necessary_exp(model, z, 1 / 200, 300 * math.pi, 1200 * math.pi)
    assert nec.verdict == PERSISTENT
    t1, t2, lhs, rhs = nec.scan.windows()
    assert t1.size == nec.scan.count > 0 and np.all(lhs > rhs)
    x0 = 0.01
    tau = model.tau
    traj = integrate(model, History.constant(1.0, x0, tau), 40 * math.pi, tau / 100)
    assert traj.x[-1] < 1e-6 * x0
    assert classify_trajectory(traj) == NOT_PERSISTENT
    assert time.perf_counter() - t0 < 60.0


def _random_model(rng):
    m, a = rng.uniform(0.5, 3.0), rng.uniform(0.2, 2.0)
    amp_s, amp_d = rng.uniform(0, 0.9), rng.uniform(0, 0.9)
    base_d = rng.uniform(0.2, 1.5)
    w = rng.uniform(2.0, 10.0)
    phase = rng.uniform(0, W)
    s0 = TimeFunction.sampled(lambda t: 1 + amp_s * np.sin(W * t / w + phase), w)
    D = TimeFunction.sampled(lambda t: base_d * (1 + amp_d * np.cos(W * t / w)), w)
    tau = round(rng.uniform(0.2, 1.5), 3)
    return ChemostatModel(UptakeFunction.monod(m, a), s0, D, tau)


def test_04_conservation():
    rng = np.random.default_rng(20240607)
    worst = 0.0
    for _ in range(5):
        model = _random_model(rng)
        hist = History.from_functions(lambda t: 0.5 + 0.3 * np.cos(t), lambda t: 0.2 + 0.1 * np.sin(t),
                                      model.tau)
        traj = integrate(model, hist, 50.0, 1e-3)
        y0 = compute_y(traj)[0]
        z0 = traj.after("s")[0] + traj.after("x")[0] + y0 + rng.uniform(0.5, 2.0)
        delta = conservation_defect(traj, z0=z0)
        I = traj.after("I")
        err = np.max(np.abs(np.abs(delta) - abs(delta[0]) * np.exp(-I))) / max(abs(delta[0]), 1.0)
        worst = max(worst, err)
    assert worst <= 1e-3


def test_05_constant_threshold():
    def model(D):
        return ChemostatModel(UptakeFunction.monod(1.0, 1.0), TimeFunction.constant(1.0),
                              TimeFunction.constant(D), 1.0)

    assert model(1.0).p(1.0) == 0.5
    assert check_constant(model(D_STAR * (1 - 1e-6))).verdict == PERSISTENT
    assert check_constant(model(D_STAR * (1 + 1e-6))).verdict == NOT_PERSISTENT
    # the verdict flips at the root itself
    lo, hi = D_STAR * 0.5, D_STAR * 1.5
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if check_constant(model(mid)).margin > 0:
            lo = mid
        else:
            hi = mid
    assert abs(lo - D_STAR) < 1e-12
    for k, expected in ((0.9, PERSISTENT), (1.1, NOT_PERSISTENT)):
        t0 = time.perf_counter()
        m = model(D_STAR * k)
        assert check_constant(m).verdict == expected
        traj = integrate(m, History.constant(1.0, 0.1, 1.0), 800.0, 0.01)
        assert classify_trajectory(traj) == expected
        assert time.perf_counter() - t0 < 10.0


def test_06_equivalence_grid():
    vals = 3.0 * np.arange(1, 21) / 20
    mismatches = excluded = 0
    for p in vals:
        for D in vals:
            for tau in vals:
                a = p * phi_constant(p, tau) - D
                b = p * math.exp(-D * tau) - D
                if abs(a) < 1e-9 or abs(b) < 1e-9:
                    excluded += 1
                    continue
                mismatches += np.sign(a) != np.sign(b)
    assert mismatches == 0
    assert excluded < 8000


def test_07_phi_self_consistency():
    assert SCENARIOS
    for path in SCENARIOS:
        cfg = load_config(path)
        model = cfg.model
        if cfg.regime == "periodic":
            z = periodic_washout(model, cfg.omega)
            phi = phi_periodic(model, z, cfg.omega)
            scaled = phi_periodic(model, z, cfg.omega, c_history=1e7)
        else:
            phi, z, _ = phi_transient(model, t_end=cfg.t_end)
            scaled, _, _ = phi_transient(model, t_end=cfg.t_end, c_history=1e7)
        res = residual_series(phi, model, z)
        assert np.nanmax(res) < 1e-5, path.name
        assert phi.residual < 1e-5, path.name
        assert np.all(phi.phi > 0) and np.all(phi.phi <= 1), path.name
        assert np.max(np.abs(scaled.phi - phi.phi)) < 1e-12, path.name


def test_08_periodic_machinery():
    periodic = [load_config(p) for p in SCENARIOS]
    periodic = [c for c in periodic if c.regime == "periodic"]
    assert len(periodic) >= 3
    for cfg in periodic:
        model, w = cfg.model, cfg.omega
        z = periodic_washout(model, w)
        assert abs(z.z[0] - z.z[-1]) < 1e-8
        phi = phi_periodic(model, z, w)
        if model.tau == 0:
            assert np.all(phi.phi == 1.0)
            continue
        tr = phi.trace
        k = phi.info["monotone_from"]
        assert phi.info["monotone_tail"]
        assert np.all(np.diff(tr[k:]) < 0) and tr.size - k >= 3
        assert tr[-1] < 1e-6
        assert phi.info["end_gap"] < 1e-6


def test_09_integrator_order():
    model = ChemostatModel(UptakeFunction.monod(2.0, 1.0), TimeFunction.constant(2.0),
                           TimeFunction.constant(0.5), 1.0)
    hist = History.constant(1.0, 0.5, 1.0)

    def run(h):
        tr = integrate(model, hist, 10.0, h)
        return np.stack([tr.after("s"), tr.after("x")])

    fine, finer = run(0.1 / 8), run(0.1 / 16)
    ref = (16 * finer[:, ::2] - fine) / 15
    errs = []
    for h in (0.1, 0.05, 0.025):
        k = int(round(h / (0.1 / 8)))
        errs.append(np.max(np.abs(run(h) - ref[:, ::k])))
    r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
    assert 12 <= r1 <= 20 and 12 <= r2 <= 20


def test_10_agreement_battery():
    assert len(BATTERY) >= 10
    kinds = {om is None for _, _, om, _, _ in BATTERY}
    verdicts = {v for _, _, _, v, _ in BATTERY}
    assert kinds == {True, False} and verdicts == {PERSISTENT, NOT_PERSISTENT}
    agree = 0
    for name, model, omega, expected, t_end in BATTERY:
        rep = check_constant(model) if omega is None else check_periodic(model, omega)
        assert abs(rep.margin) > 0.05 * rep.averages["D"], name
        h = model.tau / math.ceil(model.tau / 0.01) if model.tau > 0 else 0.01
        traj = integrate(model, battery_history(model), t_end, h)
        sim = classify_trajectory(traj)
        agree += rep.verdict == sim == expected
    assert agree == len(BATTERY)


if __name__ == "__main__":
    tests = [(k, v) for k, v in sorted(globals().items()) if k.startswith("test_")]
    failed = 0
    for name, fn in tests:
        try:
            fn()
            print(f"PASS  {name}")
        except Exception as exc:  # noqa: BLE001
            failed += 1
            print(f"FAIL  {name}: {type(exc).__name__}: {exc}")
    sys.exit(1 if failed else 0)
