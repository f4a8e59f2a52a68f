"""Command-line front end.

Subcommands: ``simulate``, ``phi``, ``check``, ``reproduce`` and ``sweep``.
Exit codes: 0 persistent (or success), 3 not persistent, 4 inconclusive,
1 configuration error, 2 numerical error.
"""

import argparse
import json
import math
import os
import sys
import tempfile
import time
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.optimize import brentq

from . import criteria as C
from .config import RESOLUTION, ConfigError, load_config
from .dde import compute_psi, compute_y, integrate, write_csv
from .errors import (ChemostatError, ConfigurationError, ConsistencyError, ConvergenceError,
                     InsufficientHorizonError, IntegrationError, RegimeError)
from .model import ChemostatModel, History, UptakeFunction
from .timefn import TimeFunction, simpson
from .washout import (DEFAULT_STEP, constant_phi_function, periodic_washout, phi_constant,
                      phi_periodic, phi_transient, residual_series, washout_solution)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
SWEEP_PARAMETERS = ("tau", "D-scale", "s0-scale")
DOC_NAMES = {"simulate": "simulate_summary.json", "phi": "phi_summary.json",
             "check": "check_report.json", "sweep": "sweep_summary.json",
             "reproduce": "reproduce_report.json"}


def write_text(path, text):
    """Write ``text`` to ``path`` atomically (temp file in the same directory, then rename)."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj):
    return json.dumps(C._jsonable(obj), indent=2, sort_keys=True) + "\n"


def thread_count():
    """Worker cap from ``CHEMOSTAT_THREADS`` (default 1)."""
    v = os.environ.get("CHEMOSTAT_THREADS", "1")
    try:
        n = int(v)
    except ValueError:
        raise ConfigurationError(f"CHEMOSTAT_THREADS must be a positive integer, got {v!r}")
    if n < 1:
        raise ConfigurationError(f"CHEMOSTAT_THREADS must be a positive integer, got {v!r}")
    return n


class Output:
    """Where and how a command writes its files."""

    def __init__(self, out, fmt):
        self.dir = out
        self.fmt = fmt
        if out is not None:
            os.makedirs(out, exist_ok=True)

    def table(self, stem, cols):
        if self.dir is None:
            return None
        if self.fmt == "json":
            path = os.path.join(self.dir, stem + ".json")
            write_text(path, dump_json({k: np.asarray(v).tolist() for k, v in cols.items()}))
        else:
            path = os.path.join(self.dir, stem + ".csv")
            write_csv(path, cols)
        return os.path.basename(path)

    def doc(self, name, obj):
        text = dump_json(obj)
        if self.dir is not None:
            write_text(os.path.join(self.dir, name), text)
        return text


def phi_step(resolution):
    return DEFAULT_STEP * RESOLUTION[resolution]


# ---------------------------------------------------------------------- simulate
def cmd_simulate(cfg, out, resolution="default"):
    """Integrate the scenario, write the trajectory and a summary with its classification."""
    model, hist = cfg.model, cfg.history
    traj = integrate(model, hist, cfg.t_end, cfg.h)
    y = compute_y(traj)
    z0 = float(traj.after("s")[0] + traj.after("x")[0] + y[0])
    z = washout_solution(model, z0, traj.t_end, traj.h)
    defect = z(traj.grid) - traj.after("s") - traj.after("x") - y
    cols = {"t": traj.grid, "s": traj.after("s"), "x": traj.after("x"), "I": traj.after("I"),
            "y": y}
    summary = {"command": "simulate", "scenario": cfg.name, "h": traj.h, "t_end": traj.t_end,
               "tau": model.tau, "max_abs_defect": float(np.max(np.abs(defect))),
               "notes": list(cfg.notes)}
    try:
        ps = compute_psi(traj)
        psi = np.full(traj.grid.size, np.nan)
        psi[:ps.psi.size] = ps.psi
        cols["psi"] = psi
        summary["psi_residual"] = ps.residual
    except ChemostatError as exc:
        summary["notes"].append(f"psi not reported: {exc}")
    cols["defect"] = defect
    try:
        verdict, details = C.classify_trajectory(traj, details=True)
    except InsufficientHorizonError as exc:
        verdict, details = C.INCONCLUSIVE, {}
        summary["notes"].append(str(exc))
    summary.update(verdict=verdict, classification=details)
    summary["data"] = out.table("trajectory", cols)
    return summary, EXIT_OK


# ---------------------------------------------------------------------- phi
def build_phi(cfg, resolution="default", t_end=None):
    """``(z, phi, regime)`` for the scenario: periodic objects when possible."""
    model = cfg.model
    h = phi_step(resolution)
    if cfg.regime == "periodic" or (cfg.regime == "constant" and cfg.omega):
        omega = cfg.omega or 2 * math.pi
        z = periodic_washout(model, omega, dt=0.5 * h)
        return z, phi_periodic(model, z, omega, h=h), "periodic"
    if cfg.regime == "constant":
        s0 = model.s0.value
        P = float(model.p(s0))
        return (lambda t: np.full(np.shape(t), s0) if np.ndim(t) else s0,
                constant_phi_function(P, model.tau), "constant")
    t_end = t_end or cfg.t_end
    phi, z, _ = phi_transient(model, t_end=t_end + model.tau, h=h)
    return z, phi, "transient"


def cmd_phi(cfg, out, resolution="default"):
    """Tabulate ``z``, ``c`` and phi with the pointwise self-consistency residual."""
    model = cfg.model
    h = phi_step(resolution)
    if cfg.regime == "periodic":
        z, phi, kind = build_phi(cfg, resolution)
    else:
        phi, z, _ = phi_transient(model, t_end=cfg.t_end, h=h)
        kind = "transient"
    res = residual_series(phi, model, z)
    cols = {"t": phi.t, "z": z(phi.t), "c": phi.c if phi.c is not None else np.full(phi.t.size, np.nan),
            "phi": phi.phi, "residual": res}
    summary = {"command": "phi", "scenario": cfg.name, "regime": kind, "tau": model.tau,
               "residual": phi.residual, "max_residual": float(np.nanmax(res)) if res.size else 0.0,
               "phi_min": float(phi.phi.min()), "phi_max": float(phi.phi.max()),
               "phi_end": float(phi.phi[-1]), "notes": list(cfg.notes)}
    if kind == "periodic":
        summary["convergence_trace"] = phi.trace
        summary["period"] = phi.period
        summary.update({k: v for k, v in phi.info.items() if k != "full_trace"})
    if model.is_constant and model.tau > 0:
        summary["phi_star"] = phi_constant(float(model.p(model.s0.value)), model.tau)
    summary["data"] = out.table("phi", cols)
    return summary, EXIT_OK


# ---------------------------------------------------------------------- check
def default_horizon(cfg, stride, T=None):
    if T is not None:
        return 4 * T
    base = cfg.omega or (cfg.model.tau if cfg.model.tau > 0 else 1.0)
    return max(40 * base, 64 * stride)


def run_check(cfg, resolution="default"):
    """Evaluate the criterion selected by ``criterion.check`` (``auto`` picks by regime)."""
    crit = cfg.criterion
    check = crit["check"]
    model = cfg.model
    if check == "auto":
        check = {"constant": "constant", "periodic": "periodic", "general": "transient"}[cfg.regime]
    if check == "constant":
        return C.check_constant(model)
    if check == "periodic":
        if cfg.omega is None and not model.is_constant:
            raise RegimeError("periodic check needs periodic data or criterion.omega")
        return C.check_periodic(model, cfg.omega or 2 * math.pi, h=phi_step(resolution))
    stride = crit["stride"] or C.default_stride(model, cfg.omega)
    horizon = crit["horizon"] or default_horizon(cfg, stride, crit["T"])
    if check == "transient":
        return C.check_transient(model, horizon, h=phi_step(resolution), stride=stride)
    if check == "necessary":
        if crit["eta"] is None or crit["T"] is None:
            raise ConfigError("the necessary check needs criterion.eta and criterion.T",
                              ("criterion",), None, cfg.name)
        z, _, _ = build_phi(cfg, resolution, horizon)
        return C.check_necessary_exp(model, z, crit["eta"], crit["T"], horizon, stride)
    z, phi, _ = build_phi(cfg, resolution, horizon)
    if check == "window" and crit["eta"] is not None and crit["T"] is not None:
        return C.check_window(model, z, phi, crit["eta"], crit["T"], horizon, stride)
    return C.search_eta_T(model, z, phi, horizon, stride)


def cmd_check(cfg, out, resolution="default"):
    rep = run_check(cfg, resolution)
    doc = rep.to_dict()
    doc.update(command="check", scenario=cfg.name, notes=doc["notes"] + list(cfg.notes))
    return doc, rep.exit_code


# ---------------------------------------------------------------------- sweep
def _swept_model(model, parameter, value):
    if parameter == "tau":
        return model.with_(tau=value)
    if parameter == "D-scale":
        return model.with_(D=model.D.scaled(value))
    return model.with_(s0=model.s0.scaled(value))


def _sweep_margin(model, regime, omega, resolution):
    if regime == "constant":
        rep = C.check_constant(model)
    else:
        rep = C.check_periodic(model, omega, h=phi_step(resolution))
    return rep.verdict, rep.margin


def cmd_sweep(cfg, out, parameter, lo, hi, steps, resolution="default"):
    """Evaluate the closed-form or average criterion across a parameter range.

    Sign changes of the margin between neighbouring values are reported as
    boundary intervals; in the constant regime each crossing is refined by
    root finding on the margin.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigurationError(f"unknown sweep parameter {parameter!r}")
    if not (steps >= 2 and hi > lo):
        raise ConfigurationError("sweep needs steps >= 2 and hi > lo")
    if parameter == "tau" and lo < 0 or parameter != "tau" and lo <= 0:
        raise ConfigurationError(f"invalid range for {parameter}: [{lo}, {hi}]")
    regime = cfg.regime
    if regime == "general":
        raise RegimeError("sweep supports constant and periodic data only")
    values = np.linspace(lo, hi, steps)
    models = [_swept_model(cfg.model, parameter, v) for v in values]
    with ThreadPoolExecutor(max_workers=thread_count()) as ex:
        rows = list(ex.map(lambda m: _sweep_margin(m, regime, cfg.omega, resolution), models))
    verdicts = [r[0] for r in rows]
    margins = np.array([r[1] for r in rows])
    boundaries = []
    for k in range(steps - 1):
        a, b = margins[k], margins[k + 1]
        if a == 0 or np.sign(a) == np.sign(b):
            continue
        est = values[k] + (values[k + 1] - values[k]) * a / (a - b)
        if regime == "constant":
            f = lambda v: C.check_constant(_swept_model(cfg.model, parameter, v)).margin
            est = brentq(f, values[k], values[k + 1], xtol=1e-14, rtol=1e-14)
        boundaries.append({"lo": values[k], "hi": values[k + 1], "estimate": est,
                           "direction": "to-persistent" if b > 0 else "to-not-persistent"})
    if len(boundaries) > 1:
        notes = ["margin is not monotone over the range; several boundary intervals reported"]
    else:
        notes = []
    data = out.table("sweep", {"value": values, "verdict": np.array(verdicts), "margin": margins})
    summary = {"command": "sweep", "scenario": cfg.name, "parameter": parameter, "regime": regime,
               "range": [lo, hi], "steps": steps, "boundaries": boundaries, "notes": notes,
               "data": data}
    return summary, EXIT_OK


# ---------------------------------------------------------------------- reproduce
def counterexample_model():
    """Uptake ``2 pi s/(1 + s)``, ``s0 = 1``, ``D = 1 - sin t``, ``tau = pi/2``.

    The washout solution is ``z = 1``, so ``p(z) = pi`` exactly.
    """
    D = TimeFunction.sampled(lambda t: 1.0 - np.sin(t), 2 * math.pi, 4096)
    return ChemostatModel(UptakeFunction.monod(2 * math.pi, 1.0), TimeFunction.constant(1.0),
                          D, math.pi / 2)


def counterexample_integral(tol=1e-8):
    """``int_0^{2 pi} pi exp(-pi/2 + sin t - cos t) dt``."""
    return simpson(lambda t: math.pi * np.exp(-math.pi / 2 + np.sin(t) - np.cos(t)),
                   0.0, 2 * math.pi, tol)


def reproduce(resolution="default"):
    """Run the counterexample pipeline; returns a list of item dicts."""
    model = counterexample_model()
    tau, omega = model.tau, 2 * math.pi
    items = []

    def item(key, label, fn):
        t0 = time.perf_counter()
        try:
            ok, value, extra = fn()
        except ChemostatError as exc:
            ok, value, extra = False, None, {"error": str(exc)}
        items.append({"item": key, "label": label, "pass": bool(ok), "value": value,
                      "seconds": round(time.perf_counter() - t0, 3), **extra})

    def a():
        v = counterexample_integral()
        return 6.42 < v < 6.44, v, {"expected": "(6.42, 6.44)"}

    def b():
        v = phi_constant(math.pi, tau)
        return 0.25 < v < 0.3, v, {"residual": abs(v - math.exp(-math.pi * tau * v)),
                                   "expected": "(0.25, 0.3)"}

    z = periodic_washout(model, omega, dt=0.5 * phi_step(resolution))

    def c():
        rep = C.check_necessary_exp(model, z, 1 / 200, 300 * math.pi, 1200 * math.pi,
                                    stride=omega / 8)
        return rep.verdict == C.PERSISTENT, rep.margin, {
            "eta": rep.eta, "T": rep.T, "n_windows": rep.scan.count,
            "worst_window": rep.witnesses["worst_window"]}

    def d():
        rep = C.check_periodic(model, omega, h=phi_step(resolution))
        return rep.margin < -0.1, rep.margin, {"verdict": rep.verdict, "averages": rep.averages}

    def e():
        x0 = 0.01
        h = tau / round(100 / RESOLUTION[resolution])
        traj = integrate(model, History.constant(1.0, x0, tau), 40 * math.pi, h)
        x_end = float(traj.x[-1])
        verdict = C.classify_trajectory(traj)
        return x_end < 1e-6 * x0 and verdict == C.NOT_PERSISTENT, x_end, {
            "x0": x0, "ratio": x_end / x0, "verdict": verdict, "h": h,
            "uptake": "monod m=2pi, a=1 with s0=1 (p(z)=pi exactly on the washout solution)"}

    item("a", "per-period weighted-rate integral > 6.42", a)
    item("b", "constant-case phi* < 0.3", b)
    item("c", "necessary windows pass with eta=1/200, T=300 pi", c)
    item("d", "average criterion fails (margin < -0.1)", d)
    item("e", "simulated x decays below 1e-6 x(0)", e)
    return items


def cmd_reproduce(out, resolution="default", stream=None):
    stream = stream or sys.stdout
    items = reproduce(resolution)
    for it in items:
        v = it["value"]
        vs = "n/a" if v is None else f"{v:.10g}"
        print(f"({it['item']}) {'PASS' if it['pass'] else 'FAIL'}  {it['label']}: {vs}",
              file=stream)
    failed = [it["item"] for it in items if not it["pass"]]
    doc = {"command": "reproduce", "items": items, "failed": failed}
    if failed:
        print(f"reproduce failed: item(s) {', '.join(failed)}", file=sys.stderr)
    return doc, (EXIT_NUMERIC if failed else EXIT_OK)


# ---------------------------------------------------------------------- entry point
def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="scenario JSON file")
    common.add_argument("--out", metavar="DIR", help="output directory (default: no files)")
    common.add_argument("--resolution", choices=list(RESOLUTION), default="default")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="format of tabular output")
    ap = argparse.ArgumentParser(prog="chemostat-delay",
                                 description="Delayed chemostat: simulation and persistence criteria.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="integrate and classify a scenario")
    sub.add_parser("phi", parents=[common], help="tabulate the weight phi")
    sub.add_parser("check", parents=[common], help="evaluate the persistence criterion")
    sub.add_parser("reproduce", parents=[common], help="run the built-in counterexample")
    sw = sub.add_parser("sweep", parents=[common], help="scan a parameter for the boundary")
    sw.add_argument("--parameter", choices=SWEEP_PARAMETERS, required=True)
    sw.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"), required=True)
    sw.add_argument("--steps", type=int, default=51)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        out = Output(args.out, args.format)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if args.command == "reproduce":
                doc, code = cmd_reproduce(out, args.resolution)
                out.doc(DOC_NAMES["reproduce"], doc)
                return code
            if not args.config:
                raise ConfigError("--config is required for this command", (), None, args.command)
            cfg = load_config(args.config, args.resolution)
            if args.command == "simulate":
                doc, code = cmd_simulate(cfg, out, args.resolution)
            elif args.command == "phi":
                doc, code = cmd_phi(cfg, out, args.resolution)
            elif args.command == "check":
                doc, code = cmd_check(cfg, out, args.resolution)
            else:
                doc, code = cmd_sweep(cfg, out, args.parameter, args.range[0], args.range[1],
                                      args.steps, args.resolution)
        sys.stdout.write(out.doc(DOC_NAMES[args.command], doc))
        return code
    except (IntegrationError, ConvergenceError, ConsistencyError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ChemostatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
