"""Persistence criteria and classification of simulated trajectories.

Window criteria compare, for every pair of sample times ``t1 < t2`` with
``t1 > T`` and ``t2 - t1 > T``::

    int_{t1}^{t2} rate(t) dt   versus   int_{t1}^{t2} (D(t) + eta) dt

where ``rate(t) = p(z(t - tau)) phi(t - tau)`` (sufficient and necessary) or
``rate(t) = p(z(t)) exp(-int_{t-tau}^t D)`` (necessary only, constant input).
Integrals are stored as running sums on the sample grid, so every window is
recoverable from a :class:`WindowScan` without materialising all pairs.
"""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InsufficientHorizonError, PreconditionError, RegimeError
from .model import is_non_null
from .timefn import cumulative_simpson, simpson
from .washout import (DEFAULT_STEP, periodic_washout, phi_constant, phi_periodic,
                      phi_transient)

PERSISTENT = "persistent"
NOT_PERSISTENT = "not-persistent"
INCONCLUSIVE = "inconclusive"

EXIT_CODES = {PERSISTENT: 0, NOT_PERSISTENT: 3, INCONCLUSIVE: 4}

QUAD_TOL = 1e-8
ABS_BAND = 1e-9


@dataclass
class WindowScan:
    """Running integrals on the sample grid and the window constraints.

    ``lhs_cum[i]`` and ``d_cum[i]`` integrate the rate and ``D`` from ``grid[0]``
    to ``grid[i]``.  A window ``(i, j)`` is admissible when ``i >= i0`` and
    ``j - i >= k0``.
    """

    grid: np.ndarray
    lhs_cum: np.ndarray
    d_cum: np.ndarray
    eta: float
    T: float
    i0: int
    k0: int
    quad_err_rate: float = 0.0

    @property
    def count(self):
        n = self.grid.size
        top = n - self.k0 - self.i0
        return max(0, top * (top + 1) // 2)

    def margins_key(self):
        return self.lhs_cum - self.d_cum - self.eta * self.grid

    def windows(self, limit=None):
        """All admissible windows as arrays ``(t1, t2, lhs, rhs)``, row-major in ``t1``."""
        n = self.grid.size
        i_list, j_list = [], []
        for i in range(self.i0, n - self.k0):
            j = np.arange(i + self.k0, n)
            i_list.append(np.full(j.size, i))
            j_list.append(j)
            if limit is not None and sum(a.size for a in j_list) >= limit:
                break
        if not i_list:
            e = np.empty(0)
            return e, e, e, e
        i = np.concatenate(i_list)[:limit]
        j = np.concatenate(j_list)[:limit]
        t1, t2 = self.grid[i], self.grid[j]
        lhs = self.lhs_cum[j] - self.lhs_cum[i]
        rhs = self.d_cum[j] - self.d_cum[i] + self.eta * (t2 - t1)
        return t1, t2, lhs, rhs

    def window(self, i, j):
        t1, t2 = self.grid[i], self.grid[j]
        return (float(t1), float(t2), float(self.lhs_cum[j] - self.lhs_cum[i]),
                float(self.d_cum[j] - self.d_cum[i] + self.eta * (t2 - t1)))


@dataclass
class CriterionReport:
    """Verdict of one criterion with the numbers that justify it."""

    criterion: str
    verdict: str
    margin: float = None
    eta: float = None
    T: float = None
    averages: dict = None
    scan: WindowScan = None
    witnesses: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    extras: dict = field(default_factory=dict, repr=False)

    @property
    def exit_code(self):
        return EXIT_CODES[self.verdict]

    def to_dict(self, max_windows=1000):
        """JSON-ready dict; at most ``max_windows`` windows (the worst ones) are listed."""
        d = {"criterion": self.criterion, "verdict": self.verdict,
             "margin": _num(self.margin), "eta": _num(self.eta), "T": _num(self.T),
             "averages": None if self.averages is None else
             {k: _num(v) for k, v in self.averages.items()},
             "windows": [], "n_windows": 0,
             "witnesses": {k: _jsonable(v) for k, v in self.witnesses.items()},
             "notes": list(self.notes)}
        if self.scan is not None:
            t1, t2, lhs, rhs = _worst_windows(self.scan, max_windows)
            d["windows"] = [{"t1": _num(a), "t2": _num(b), "lhs": _num(c), "rhs": _num(e)}
                            for a, b, c, e in zip(t1, t2, lhs, rhs)]
            d["n_windows"] = self.scan.count
            d["windows_truncated"] = self.scan.count > len(d["windows"])
        return d

    def to_json(self, max_windows=1000):
        return json.dumps(self.to_dict(max_windows), indent=2, sort_keys=True)


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _jsonable(v):
    if isinstance(v, (bool, str)) or v is None:
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return _num(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    return str(v)


def _worst_windows(scan, k):
    """The ``k`` admissible windows with the smallest margin, one per start time first."""
    n = scan.grid.size
    if scan.count == 0:
        e = np.empty(0)
        return e, e, e, e
    if scan.count <= k:
        return scan.windows()
    M = scan.margins_key()
    best_j = _suffix_argmin(M)
    i = np.arange(scan.i0, n - scan.k0)
    j = best_j[i + scan.k0]
    marg = M[j] - M[i]
    order = np.argsort(marg, kind="stable")[:k]
    i, j = i[order], j[order]
    t1, t2 = scan.grid[i], scan.grid[j]
    lhs = scan.lhs_cum[j] - scan.lhs_cum[i]
    rhs = scan.d_cum[j] - scan.d_cum[i] + scan.eta * (t2 - t1)
    return t1, t2, lhs, rhs


def _suffix_argmin(a):
    """``out[k]`` = index of the minimum of ``a[k:]`` (first occurrence)."""
    n = a.size
    out = np.empty(n, dtype=np.int64)
    best = n - 1
    for k in range(n - 1, -1, -1):
        if a[k] <= a[best]:
            best = k
        out[k] = best
    return out


# ---------------------------------------------------------------------- closed-form criteria
def check_constant(model, tol=1e-12):
    """Constant input and washout: persistent iff ``p(s0) exp(-D tau) > D``.

    The equivalent form ``p(s0) phi* > D`` with ``phi* = exp(-p(s0) tau phi*)``
    is reported alongside.  With ``tau = 0`` this is ``p(s0) > D``.
    """
    if not model.is_constant:
        raise RegimeError("check_constant needs constant s0 and D")
    D = model.D.value
    if not D > 0:
        raise DomainError("check_constant needs D > 0")
    P = float(model.p(model.s0.value))
    tau = model.tau
    margin = P * math.exp(-D * tau) - D
    phis = phi_constant(P, tau)
    margin_phi = P * phis - D
    verdict = _by_margin(margin, tol)
    return CriterionReport(
        criterion="constant: p(s0) exp(-D tau) > D", verdict=verdict, margin=margin,
        averages={"pzphi": P * phis, "D": D},
        witnesses={"p_s0": P, "phi_star": phis, "margin_phi": margin_phi, "tau": tau})


def _by_margin(margin, band):
    if margin > band:
        return PERSISTENT
    if margin < -band:
        return NOT_PERSISTENT
    return INCONCLUSIVE


def check_periodic(model, omega, tol=1e-6, h=DEFAULT_STEP, phi_tol=1e-9):
    """Periodic data: persistent iff ``<p(z) phi> > <D>`` over one period ``omega``.

    ``z`` is the periodic washout solution and ``phi`` the periodic weight.
    ``|margin| <= tol`` gives ``inconclusive``.
    """
    omega = float(omega)
    if not model.s0.min_value() > 0:
        raise PreconditionError("periodic criterion needs a positive input s0")
    z = periodic_washout(model, omega, dt=0.5 * h)
    phi = phi_periodic(model, z, omega, tol=phi_tol, h=h)
    pzphi = float(simpson(lambda t: model.p(z(t)) * phi(t), 0.0, omega, 1e-11)) / omega
    mean_D = model.D.integrate(0.0, omega) / omega
    if not mean_D > 0:
        raise DomainError("the washout rate must be non-null")
    margin = pzphi - mean_D
    notes = []
    if model.tau == 0:
        notes.append("tau = 0: phi is identically 1 and the rule is <p(z)> > <D>")
    return CriterionReport(
        criterion="periodic: <p(z) phi> > <D>", verdict=_by_margin(margin, tol), margin=margin,
        averages={"pzphi": pzphi, "D": mean_D},
        witnesses={"omega": omega, "z0": z.z0, "phi_residual": phi.residual,
                   "phi_min": float(phi.phi.min()), "phi_max": float(phi.phi.max()),
                   "phi_trace": phi.trace, **{k: v for k, v in phi.info.items()
                                              if k != "full_trace"}},
        notes=notes, extras={"z": z, "phi": phi})


# ---------------------------------------------------------------------- window scans
def default_stride(model, omega=None):
    """``omega/8`` for periodic data, ``tau`` otherwise, ``1.0`` without delay.

    Without an explicit ``omega`` the longest period of ``s0`` and ``D`` is used.
    """
    if omega is None:
        periods = [f.period for f in (model.s0, model.D) if f.is_periodic]
        omega = max(periods) if periods else None
    if omega is not None:
        return omega / 8.0
    return model.tau if model.tau > 0 else 1.0


def _window_bounds(T, stride):
    k = int(math.floor(T / stride + 1e-9)) + 1
    return k, k


def _running_integral(fn, horizon, stride, n_sub):
    n = int(round(horizon / stride))
    fine = cumulative_simpson(fn, 0.0, stride / n_sub, n * n_sub)
    coarse = cumulative_simpson(fn, 0.0, 2 * stride / n_sub, n * n_sub // 2)
    err = float(np.max(np.abs(fine[::2] - coarse))) / max(horizon, 1e-300)
    return fine[::n_sub], err


def _scan(rate, model, eta, T, horizon, stride, n_sub=8):
    if not (eta >= 0 and T > 0):
        raise DomainError("eta must be >= 0 and T > 0")
    n = int(math.floor(horizon / stride + 1e-9))
    if n < 1 or horizon < 2 * T + stride:
        raise InsufficientHorizonError(
            f"horizon {horizon:g} too short for T={T:g} and stride {stride:g} "
            "(need horizon >= 2T + stride)")
    horizon = n * stride
    grid = stride * np.arange(n + 1)
    L, err = _running_integral(rate, horizon, stride, n_sub)
    R = model.D.cumulative(grid)
    i0, k0 = _window_bounds(T, stride)
    return WindowScan(grid, L, R, eta, T, i0, k0, quad_err_rate=err)


def _scan_extrema(scan, qtol):
    """Smallest window margins after subtracting and adding the tolerance band."""
    n = scan.grid.size
    if scan.count == 0:
        raise DomainError("no admissible window on this horizon")
    M = scan.margins_key()
    i = np.arange(scan.i0, n - scan.k0)
    out = {}
    for key, sign in (("strict", -1.0), ("loose", 1.0)):
        A = M + sign * qtol * scan.grid
        best = _suffix_argmin(A)
        j = best[i + scan.k0]
        v = A[j] - A[i]
        k = int(np.argmin(v))
        out[key] = (float(v[k]), int(i[k]), int(j[k]))
    best = _suffix_argmin(M)
    j = best[i + scan.k0]
    v = M[j] - M[i]
    k = int(np.argmin(v))
    out["raw"] = (float(v[k]), int(i[k]), int(j[k]))
    return out


def _window_report(name, scan, qtol, notes=()):
    band = max(qtol, scan.quad_err_rate)
    ext = _scan_extrema(scan, band)
    if ext["strict"][0] > ABS_BAND:
        verdict = PERSISTENT
    elif ext["loose"][0] < -ABS_BAND:
        verdict = NOT_PERSISTENT
    else:
        verdict = INCONCLUSIVE
    m, i, j = ext["raw"]
    return CriterionReport(
        criterion=name, verdict=verdict, margin=m, eta=scan.eta, T=scan.T, scan=scan,
        witnesses={"passed": verdict == PERSISTENT, "worst_window": scan.window(i, j),
                   "n_windows": scan.count, "band_rate": band,
                   "quad_err_rate": scan.quad_err_rate, "stride": float(scan.grid[1])},
        notes=list(notes))


def _positive_eta_T(eta, T):
    if not (eta > 0 and T > 0):
        raise DomainError(f"eta and T must be positive, got eta={eta}, T={T}")


def weighted_rate(model, z, phi):
    """``t -> p(z(t - tau)) phi(t - tau)``."""
    tau = model.tau
    return lambda t: model.p(z(np.asarray(t) - tau)) * phi(np.asarray(t) - tau)


def check_window(model, z, phi, eta, T, horizon, stride=None, qtol=QUAD_TOL):
    """Check ``int p(z(t-tau)) phi(t-tau) > int (D + eta)`` on all sampled windows.

    A pass means every window clears the tolerance band; any window below
    the negative band fails the check (``not-persistent`` for this ``eta, T``).
    """
    _positive_eta_T(eta, T)
    stride = stride or default_stride(model, getattr(phi, "period", None))
    scan = _scan(weighted_rate(model, z, phi), model, eta, T, horizon, stride)
    rep = _window_report("window: int p(z) phi > int (D + eta)", scan, qtol)
    if rep.verdict == NOT_PERSISTENT:
        rep.notes.append("criterion not satisfied for the given eta and T")
    return rep


def _eta_sup(scan):
    """Largest ``eta`` such that every admissible window satisfies the inequality."""
    G = scan.lhs_cum - scan.d_cum
    t = scan.grid
    n = t.size
    best = math.inf
    arg = None
    for i in range(scan.i0, n - scan.k0):
        j = slice(i + scan.k0, n)
        r = (G[j] - G[i]) / (t[j] - t[i])
        k = int(np.argmin(r))
        if r[k] < best:
            best = float(r[k])
            arg = (i, i + scan.k0 + k)
    return best, arg


def search_eta_T(model, z, phi, horizon, stride=None, qtol=QUAD_TOL, T_min=None):
    """Search a geometric ladder of ``T`` for the largest admissible ``eta``.

    For each ``T`` the supremum of admissible ``eta`` is computed exactly on
    the sample grid and then rounded down to the ladder ``2**-k * max D``,
    ``k = 0..20``.  The best ``(eta, T)`` (largest ``eta``, then smallest
    ``T``) is returned; ``inconclusive``/``not-persistent`` when none exists.
    """
    stride = stride or default_stride(model, getattr(phi, "period", None))
    rate = weighted_rate(model, z, phi)
    T = T_min or 2 * stride
    maxD = model.D.max_value() or 1.0
    ladder = [maxD * 2.0 ** -k for k in range(21)]
    tried = []
    best = None
    sups = []
    base = None
    while horizon >= 2 * T + stride:
        scan = _scan(rate, model, 0.0, T, horizon, stride) if base is None else \
            WindowScan(base.grid, base.lhs_cum, base.d_cum, 0.0, T,
                       *_window_bounds(T, stride), quad_err_rate=base.quad_err_rate)
        base = scan
        band = max(qtol, scan.quad_err_rate)
        sup, arg = _eta_sup(scan)
        sups.append(sup)
        eta = next((e for e in ladder if e < sup - band - 2 * ABS_BAND / T), None)
        tried.append({"T": T, "eta_sup": sup, "eta": eta})
        if eta is not None and (best is None or eta > best[0]):
            best = (eta, T, sup)
        T *= 2
    if not tried:
        raise InsufficientHorizonError("horizon too short for any T on the ladder")
    witnesses = {"ladder": tried}
    if best is not None:
        eta, T, sup = best
        rep = check_window(model, z, phi, eta, T, horizon, stride, qtol)
        rep.criterion = "window search: exists eta, T"
        rep.witnesses.update(witnesses, eta_sup=sup)
        return rep
    band = max(qtol, base.quad_err_rate)
    verdict = NOT_PERSISTENT if max(sups) < -band - ABS_BAND else INCONCLUSIVE
    return CriterionReport(criterion="window search: exists eta, T", verdict=verdict,
                           margin=max(sups), witnesses=witnesses,
                           notes=["no admissible (eta, T) found"])


def check_necessary_exp(model, z, eta, T, horizon, stride=None, qtol=QUAD_TOL, omega=None):
    """Necessary-only condition for constant input: ``int p(z) e^{-int_{t-tau}^t D} > int (D + eta)``.

    A pass does not imply persistence.  Non-constant ``s0`` lies outside the
    hypothesis; it is evaluated anyway with a warning.
    """
    _positive_eta_T(eta, T)
    notes = ["necessary only: passing does not imply persistence"]
    if not model.s0.is_constant:
        msg = "s0 is not constant; the necessary condition is not established for this case"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    tau = model.tau
    stride = stride or default_stride(model, omega)

    def rate(t):
        t = np.asarray(t, dtype=float)
        return model.p(z(t)) * np.exp(-_window_D(model, t, tau))

    scan = _scan(rate, model, eta, T, horizon, stride)
    rep = _window_report("necessary: int p(z) exp(-int D) > int (D + eta)", scan, qtol, notes)
    rep.witnesses["necessary_only"] = True
    return rep


def _window_D(model, t, tau):
    """``int_{t-tau}^t D`` for an increasing uniform array ``t`` starting at 0."""
    if tau == 0:
        return np.zeros_like(t)
    n = t.size - 1
    if n == 0:
        return np.array([model.D_integral(t[0] - tau, t[0])])
    dt = t[1] - t[0]
    A = cumulative_simpson(model.D, t[0], dt, n)
    B = cumulative_simpson(model.D_extended, t[0] - tau, dt, n)
    head = model.D_integral(t[0] - tau, t[0])
    return A - B + head


def check_transient(model, horizon, z0=None, h=DEFAULT_STEP, stride=None):
    """General data: build ``z`` and phi on ``[0, horizon]`` and run :func:`search_eta_T`."""
    phi, z, _ = phi_transient(model, z0=z0, t_end=horizon + model.tau, h=h)
    rep = search_eta_T(model, z, phi, horizon, stride)
    rep.witnesses["phi_residual"] = phi.residual
    rep.notes.append("finite-horizon evidence for the window criterion")
    rep.extras.update(z=z, phi=phi)
    return rep


# ---------------------------------------------------------------------- simulation
def classify_trajectory(traj, tail_fraction=0.25, threshold=1e-4, details=False):
    """Classify a simulated trajectory as persistent, not persistent or inconclusive.

    ``persistent``: the tail minimum of ``x`` exceeds ``threshold`` and the
    minimum over the last third of the tail is at least 90% of the one over
    the first third.  ``not-persistent``: ``x(t_end) < threshold * 1e-3`` and
    the maxima over the three tail thirds strictly decrease.

    Raises
    ------
    PreconditionError
        Null initial condition.
    InsufficientHorizonError
        ``I(t_end) < 30``.
    """
    if not is_non_null(traj.history):
        raise PreconditionError("null initial condition: x stays identically zero")
    if traj.I[-1] < 30:
        raise InsufficientHorizonError(
            f"horizon too short: cumulative washout {traj.I[-1]:.3g} < 30")
    t, x = traj.grid, traj.after("x")
    tail = x[t >= (1.0 - tail_fraction) * traj.t_end]
    thirds = np.array_split(tail, 3)
    mins = [float(p.min()) for p in thirds]
    maxs = [float(p.max()) for p in thirds]
    delta = float(tail.min())
    if delta > threshold and mins[2] >= 0.9 * mins[0]:
        verdict = PERSISTENT
    elif x[-1] < threshold * 1e-3 and maxs[0] > maxs[1] > maxs[2]:
        verdict = NOT_PERSISTENT
    else:
        verdict = INCONCLUSIVE
    if details:
        return verdict, {"delta_hat": delta, "tail_minima": mins, "tail_maxima": maxs,
                         "x_end": float(x[-1]), "I_end": float(traj.I[-1])}
    return verdict
