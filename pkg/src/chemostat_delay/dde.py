"""Method-of-steps integration of the delayed chemostat and trajectory diagnostics.

The integrated system is::

    s' = (s0(t) - s) D(t) - x p(s)
    x' = -D(t) x + x(t - tau) p(s(t - tau)) exp(-(I(t) - I(t - tau)))
    I' = D(t)

with ``I`` the cumulative washout.  Before ``t = 0`` the cumulative washout
is ``I(t) = -int_t^0 D``, where ``D`` on negative times follows
:meth:`ChemostatModel.D_extended`.
"""

import csv
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from ._steps import history_integral, integrate_steps, resolve_step
from .errors import ConfigurationError, DomainError, UndefinedPsiError
from .model import ChemostatModel, History
from .washout import washout_solution


@dataclass(frozen=True)
class Trajectory:
    """Solution on the grid ``t = -tau, -tau + h, ..., t_end``.

    ``start`` is the index of ``t = 0``; entries before it are the history
    sampled on the grid.  ``ds``, ``dx`` hold right-hand sides at the nodes
    with ``t >= 0``.
    """

    model: ChemostatModel
    history: History
    h: float
    m: int
    t: np.ndarray
    s: np.ndarray
    x: np.ndarray
    I: np.ndarray
    ds: np.ndarray
    dx: np.ndarray

    @property
    def start(self):
        return self.m

    @property
    def t_end(self):
        return float(self.t[-1])

    @property
    def grid(self):
        return self.t[self.m:]

    def after(self, name):
        """The series ``name`` restricted to ``t >= 0``."""
        return getattr(self, name)[self.m:]

    def to_csv(self, path, **extra):
        """Write ``t, s, x, I`` (``t >= 0``) plus any extra aligned columns.

        Values use 17 significant digits.  The file is written atomically.
        """
        cols = {"t": self.grid, "s": self.after("s"), "x": self.after("x"), "I": self.after("I")}
        for k, v in extra.items():
            if v is not None:
                cols[k] = np.asarray(v)
        write_csv(path, cols)


def _column(v):
    a = np.asarray(v)
    if a.dtype.kind in "biuf":
        return ["%.17g" % x for x in a.astype(float)]
    return [str(x) for x in a]


def write_csv(path, columns):
    """Atomically write ``columns`` (name -> array) as CSV.

    Numbers use 17 significant digits; other values are written as text.
    """
    names = list(columns)
    n = max(len(v) for v in columns.values())
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            arrays = [_column(columns[k]) for k in names]
            for i in range(n):
                w.writerow([a[i] if i < len(a) else "" for a in arrays])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def integrate(model, history, t_end, h):
    """Integrate the chemostat from ``history`` up to ``t_end`` with RK4 step ``h``.

    ``h`` must divide the delay.  The final time is rounded up to a whole
    number of steps.

    Raises
    ------
    ConfigurationError
        ``h`` does not divide ``tau`` or the history has the wrong length.
    IntegrationError
        The state became non-finite or clearly negative.
    """
    if not t_end > 0:
        raise DomainError("t_end must be positive")
    tau = model.tau
    if abs(history.tau - tau) > 1e-9 * max(1.0, tau):
        raise ConfigurationError(
            f"history covers [-{history.tau:g}, 0] but the delay is {tau:g}")
    h, m = resolve_step(tau, h)
    n = max(1, math.ceil(t_end / h - 1e-9))

    th = 0.5 * h * np.arange(2 * n + 1)
    Dl = model.D(th).tolist()
    s0l = model.s0(th).tolist()
    p = model.p.scalar

    if m:
        tH = 0.5 * h * (np.arange(2 * m + 1) - 2 * m)
        hist = list(zip(history.s_at(tH), history.x_at(tH), history_integral(model, h, m)))
    else:
        hist = []
    y0 = (float(history.s[-1]), float(history.x[-1]), 0.0)
    exp = math.exp

    def rhs(j, y, yd):
        s, x, I = y
        D = Dl[j]
        return ((s0l[j] - s) * D - x * p(s),
                -D * x + yd[1] * p(yd[0]) * exp(yd[2] - I),
                D)

    Y, F, _ = integrate_steps(rhs, y0, hist, h, m, n, nonneg=(0, 1))

    if m:
        tn = h * (np.arange(m) - m)
        pre_s, pre_x = history.s_at(tn), history.x_at(tn)
        pre_I = history_integral(model, h, m)[0:-1:2]
    else:
        tn = pre_s = pre_x = pre_I = np.empty(0)
    t = np.concatenate([tn, h * np.arange(n + 1)])
    return Trajectory(
        model=model, history=history, h=h, m=m, t=t,
        s=np.concatenate([pre_s, Y[:, 0]]),
        x=np.concatenate([pre_x, Y[:, 1]]),
        I=np.concatenate([pre_I, Y[:, 2]]),
        ds=F[:, 0], dx=F[:, 1],
    )


def compute_y(traj, model=None):
    """Nutrient stored internally, ``y(t) = int_{t-tau}^t x p(s) exp(-(I(t)-I(u))) du``.

    Trapezoid rule on the grid; one value per node with ``t >= 0``.
    """
    model = model or traj.model
    m, h = traj.m, traj.h
    n = traj.t.size - m
    if m == 0:
        return np.zeros(n)
    g = traj.x * model.p(traj.s)
    I = traj.I
    Ik = I[m:]
    y = np.zeros(n)
    for j in range(m + 1):
        w = 0.5 * h if j in (0, m) else h
        sl = slice(j, j + n)
        y += w * g[sl] * np.exp(I[sl] - Ik)
    return y


def conservation_defect(traj, model=None, z0=None):
    """``z - s - x - y`` on the nodes ``t >= 0`` for the washout solution started at ``z0``.

    Analytically the defect equals its initial value times ``exp(-I(t))``.
    """
    model = model or traj.model
    if z0 is None:
        raise DomainError("z0 is required")
    z = washout_solution(model, z0, traj.t_end, traj.h)
    zt = z(traj.grid)
    return zt - traj.after("s") - traj.after("x") - compute_y(traj, model)


@dataclass(frozen=True)
class PsiSeries:
    """``psi`` on the nodes ``0 <= t <= t_end - tau`` and its self-consistency residual."""

    t: np.ndarray
    psi: np.ndarray
    residual: float


def _require_positive_x(traj, lo, hi):
    x = traj.x[lo:hi]
    if x.size and not np.all(x > 0):
        k = lo + int(np.argmax(~(x > 0)))
        raise UndefinedPsiError(f"x <= 0 at t={traj.t[k]:.6g}; psi is undefined")


def compute_psi(traj):
    """Trajectory weight ``psi(t) = x(t)/x(t+tau) * exp(-(I(t+tau) - I(t)))``.

    The residual is ``max |psi(t) - exp(-int_{t-tau}^t p(s) psi)|`` over
    ``t >= tau`` (trapezoid rule), which vanishes for the exact solution.
    """
    m, h = traj.m, traj.h
    _require_positive_x(traj, m, traj.t.size)
    if m == 0:
        return PsiSeries(traj.grid.copy(), np.ones(traj.grid.size), 0.0)
    x, I = traj.x[m:], traj.I[m:]
    n = x.size - m
    if n <= 0:
        raise DomainError("trajectory shorter than one delay; psi needs t + tau <= t_end")
    psi = x[:n] / x[m:] * np.exp(I[:n] - I[m:])
    g = traj.model.p(traj.s[m:m + n]) * psi
    G = np.concatenate([[0.0], np.cumsum(0.5 * h * (g[1:] + g[:-1]))])
    resid = 0.0
    if n > m:
        win = G[m:] - G[:-m]
        resid = float(np.max(np.abs(psi[m:] - np.exp(-win))))
    return PsiSeries(traj.grid[:n].copy(), psi, resid)


def log_growth_identity(traj):
    """Largest violation of ``ln x(t2) - ln x(t1) = int (p(s(t-tau)) psi(t-tau) - D(t)) dt``.

    All pairs ``tau <= t1 < t2 <= t_end`` on the grid are covered.
    """
    m, h = traj.m, traj.h
    _require_positive_x(traj, 0, traj.t.size)
    x, s, I, t = traj.x, traj.s, traj.I, traj.t
    k0 = 2 * m  # t = tau in the full array
    if k0 >= t.size - 1:
        raise DomainError("trajectory too short for the log-growth identity")
    xk = x[k0:]
    # p(s(t-tau)) psi(t-tau) = x(t-tau) p(s(t-tau)) exp(-(I(t)-I(t-tau))) / x(t)
    r = x[m:m + xk.size] * traj.model.p(s[m:m + xk.size]) * np.exp(I[m:m + xk.size] - I[k0:]) / xk
    r = r - traj.model.D(t[k0:])
    R = np.concatenate([[0.0], np.cumsum(0.5 * h * (r[1:] + r[:-1]))])
    L = np.log(xk) - R
    return float(L.max() - L.min())
