"""JSON scenario files.

A scenario is one JSON object::

    {
      "name": "constant-persistent",
      "model": {
        "uptake": {"kind": "monod", "m": 2, "a": 1},
        "s0": {"kind": "constant", "value": 2},
        "D": {"kind": "periodic", "period": 6.283185307179586, "expr": "0.5 + 0.25*cos(t)"},
        "tau": 1
      },
      "history": {"s": 1.0, "x": 0.1},
      "run": {"t_end": 200, "h": 0.01},
      "criterion": {"check": "auto", "eta": null, "T": null, "horizon": null}
    }

Signals take ``{"kind": "constant", "value": v}``, ``{"kind": "periodic",
"period": w, "samples": [...]}`` (or ``"expr"`` in ``t`` sampled ``n`` times),
or ``{"kind": "table", "t": [...], "v": [...], "extrapolation": "hold"}``.
The history gives constants or ``{"t": [...], "s": [...], "x": [...]}`` knots
on ``[-tau, 0]``.  Errors name the offending field and its line.
"""

import ast
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._steps import divisor_step
from .errors import ChemostatError, ConfigurationError
from .model import ChemostatModel, History, UptakeFunction
from .timefn import TimeFunction

RESOLUTION = {"fast": 2.0, "default": 1.0, "fine": 0.5}
CHECKS = ("auto", "constant", "periodic", "search", "window", "necessary", "transient")

_FUNCS = {"sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
          "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh, "maximum": np.maximum,
          "minimum": np.minimum}
_CONSTS = {"pi": math.pi, "e": math.e}
_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
          ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)


class ConfigError(ConfigurationError):
    """Invalid scenario file; ``path`` is the JSON field, ``line`` its 1-based line."""

    def __init__(self, message, path=(), line=None, source="<config>"):
        where = ".".join(str(p) for p in path) or "<root>"
        loc = f"{source}:{line}" if line else source
        super().__init__(f"{loc}: {where}: {message}")
        self.path = tuple(path)
        self.line = line


@dataclass
class ScenarioConfig:
    """Parsed scenario; ``omega`` is the common period when the data are periodic."""

    name: str
    model: ChemostatModel
    history: History
    t_end: float
    h: float
    tol: float
    criterion: dict
    omega: float = None
    regime: str = "constant"
    notes: list = field(default_factory=list)
    raw: dict = field(default_factory=dict, repr=False)


def compile_expr(expr):
    """Vectorised function of ``t`` from an arithmetic expression.

    Only numbers, ``t``, ``pi``, ``e``, ``+ - * / **`` and the functions
    ``sin cos tan exp log sqrt abs tanh maximum minimum`` are accepted.
    """
    tree = ast.parse(expr, mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise ValueError(f"unsupported syntax {type(node).__name__} in {expr!r}")
        if isinstance(node, ast.Name) and node.id not in _FUNCS and node.id not in _CONSTS \
                and node.id != "t":
            raise ValueError(f"unknown name {node.id!r} in {expr!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name)
                                               and node.func.id in _FUNCS):
            raise ValueError(f"unsupported call in {expr!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ValueError(f"unsupported literal in {expr!r}")
    code = compile(tree, "<expr>", "eval")
    env = {"__builtins__": {}, **_FUNCS, **_CONSTS}
    return lambda t: eval(code, env, {"t": np.asarray(t, dtype=float)})


class _Parser:
    def __init__(self, text, source):
        self.text = text
        self.source = source
        self.lines = text.splitlines()

    def line_of(self, path):
        """Best-effort line of the JSON field ``path``: successive key searches."""
        pos = 0
        for key in path:
            if isinstance(key, int):
                continue
            k = self.text.find(json.dumps(key), pos)
            if k < 0:
                break
            pos = k
        return self.text.count("\n", 0, pos) + 1 if path else None

    def fail(self, message, path):
        raise ConfigError(message, path, self.line_of(path), self.source)

    def get(self, d, key, path, kind=None, default=..., positive=False, nonneg=False):
        if not isinstance(d, dict):
            self.fail("expected an object", path)
        if key not in d or d[key] is None:
            if default is ...:
                self.fail(f"missing required field {key!r}", path)
            return default
        v = d[key]
        p = path + (key,)
        if kind is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                self.fail(f"expected a finite number, got {v!r}", p)
            v = float(v)
            if positive and not v > 0:
                self.fail(f"must be > 0, got {v}", p)
            if nonneg and v < 0:
                self.fail(f"must be >= 0, got {v}", p)
        elif kind is not None and not isinstance(v, kind):
            self.fail(f"expected {getattr(kind, '__name__', kind)}, got {type(v).__name__}", p)
        return v

    def numbers(self, d, key, path):
        v = self.get(d, key, path, list)
        try:
            a = np.asarray(v, dtype=float)
        except (TypeError, ValueError):
            self.fail("expected a list of numbers", path + (key,))
        if a.ndim != 1 or not np.all(np.isfinite(a)):
            self.fail("expected a flat list of finite numbers", path + (key,))
        return a

    def signal(self, d, path):
        kind = self.get(d, "kind", path, str)
        try:
            if kind == "constant":
                return TimeFunction.constant(self.get(d, "value", path, float))
            if kind == "periodic":
                period = self.get(d, "period", path, float, positive=True)
                if "expr" in d:
                    expr = self.get(d, "expr", path, str)
                    n = self.get(d, "n", path, int, default=4096)
                    try:
                        fn = compile_expr(expr)
                        return TimeFunction.sampled(fn, period, n)
                    except (SyntaxError, ValueError, ZeroDivisionError) as exc:
                        if isinstance(exc, ChemostatError):
                            raise
                        self.fail(str(exc), path + ("expr",))
                return TimeFunction.periodic(period, self.numbers(d, "samples", path))
            if kind in ("table", "tabulated"):
                ext = self.get(d, "extrapolation", path, str, default=None)
                return TimeFunction.tabulated(self.numbers(d, "t", path),
                                              self.numbers(d, "v", path), ext)
        except ChemostatError as exc:
            if isinstance(exc, ConfigError):
                raise
            self.fail(str(exc), path)
        self.fail(f"unknown signal kind {kind!r} (constant, periodic, table)", path + ("kind",))

    def uptake(self, d, path):
        kind = self.get(d, "kind", path, str)
        try:
            if kind == "monod":
                return UptakeFunction.monod(self.get(d, "m", path, float),
                                            self.get(d, "a", path, float))
            if kind in ("table", "tabulated"):
                return UptakeFunction.tabulated(self.numbers(d, "s", path),
                                                self.numbers(d, "p", path))
        except ChemostatError as exc:
            if isinstance(exc, ConfigError):
                raise
            self.fail(str(exc), path)
        self.fail(f"unknown uptake kind {kind!r} (monod, table)", path + ("kind",))

    def history(self, d, tau, path):
        if d is None:
            self.fail("missing history block", path)
        try:
            if "t" in d:
                t = self.numbers(d, "t", path)
                s = self.numbers(d, "s", path)
                x = self.numbers(d, "x", path)
                hist = History(t, s, x)
                if abs(hist.tau - tau) > 1e-9 * max(1.0, tau):
                    self.fail(f"history covers [{t[0]:g}, 0] but tau = {tau:g}", path + ("t",))
                return hist
            s = self.get(d, "s", path, float, nonneg=True)
            x = self.get(d, "x", path, float, nonneg=True)
            return History.constant(s, x, tau)
        except ChemostatError as exc:
            if isinstance(exc, ConfigError):
                raise
            self.fail(str(exc), path)


def _common_period(s0, D, omega):
    periods = [f.period for f in (s0, D) if f.is_periodic]
    if not periods:
        return omega
    ref = omega or periods[0]
    for w in periods:
        r = ref / w
        if abs(r - round(r)) > 1e-9 * max(1.0, r) or round(r) < 1:
            raise ConfigurationError(
                f"periods {w:g} and {ref:g} are not commensurate; give criterion.omega")
    return ref


def regime_of(model):
    if model.is_constant:
        return "constant"
    if all(f.is_constant or f.is_periodic for f in (model.s0, model.D)):
        return "periodic"
    return "general"


def parse_config(text, source="<config>", resolution="default"):
    """Parse scenario JSON text into a :class:`ScenarioConfig`.

    ``resolution`` scales the step (``fast`` doubles it, ``fine`` halves it).
    A step that does not divide ``tau`` is lowered to the nearest divisor
    with a warning.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", (), exc.lineno,
                          source) from None
    if resolution not in RESOLUTION:
        raise ConfigError(f"unknown resolution {resolution!r}", ("resolution",), None, source)
    P = _Parser(text, source)
    if not isinstance(raw, dict):
        P.fail("top level must be an object", ())
    name = P.get(raw, "name", (), str, default=source)
    mblock = P.get(raw, "model", (), dict)
    mp = ("model",)
    tau = P.get(mblock, "tau", mp, float, default=0.0, nonneg=True)
    p = P.uptake(P.get(mblock, "uptake", mp, dict), mp + ("uptake",))
    s0 = P.signal(P.get(mblock, "s0", mp, dict), mp + ("s0",))
    D = P.signal(P.get(mblock, "D", mp, dict), mp + ("D",))
    model = ChemostatModel(p, s0, D, tau)

    crit = dict(P.get(raw, "criterion", (), dict, default={}))
    cp = ("criterion",)
    check = P.get(crit, "check", cp, str, default="auto")
    if check not in CHECKS:
        P.fail(f"unknown check {check!r}; expected one of {', '.join(CHECKS)}", cp + ("check",))
    omega = P.get(crit, "omega", cp, float, default=None, positive=True)
    try:
        omega = _common_period(s0, D, omega)
    except ConfigurationError as exc:
        P.fail(str(exc), mp)
    for key in ("eta", "T", "horizon", "stride"):
        crit[key] = P.get(crit, key, cp, float, default=None, positive=True)
    crit["check"] = check
    crit["omega"] = omega

    history = P.history(P.get(raw, "history", (), dict), tau, ("history",))

    run = P.get(raw, "run", (), dict, default={})
    rp = ("run",)
    t_end = P.get(run, "t_end", rp, float, default=200.0, positive=True)
    h0 = P.get(run, "h", rp, float, default=0.01, positive=True)
    tol = P.get(run, "tol", rp, float, default=1e-8, positive=True)
    notes = []
    h = h0 * RESOLUTION[resolution]
    if tau > 0:
        hd = divisor_step(tau, h)
        if abs(hd - h) > 1e-12 * h and abs(round(tau / h) * h - tau) > 1e-9 * tau:
            msg = f"run.h={h:g} does not divide tau={tau:g}; using h={hd:.12g}"
            warnings.warn(msg, stacklevel=2)
            notes.append(msg)
        h = hd
    return ScenarioConfig(name=name, model=model, history=history, t_end=t_end, h=h, tol=tol,
                          criterion=crit, omega=omega, regime=regime_of(model), notes=notes,
                          raw=raw)


def load_config(path, resolution="default"):
    """Read and parse the scenario file at ``path``."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read file: {exc.strerror}", (), None, str(path)) from None
    return parse_config(text, str(path), resolution)
