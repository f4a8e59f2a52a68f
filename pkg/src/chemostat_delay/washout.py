"""Washout solution ``z``, the auxiliary linear delay solution ``c`` and the weight ``phi``.

``z`` solves ``z' = (s0 - z) D`` without organisms.  ``c`` solves the
linearisation of the organism equation around ``z``::

    c' = -D c + c(t - tau) p(z(t - tau)) exp(-(I(t) - I(t - tau)))

and ``phi(t) = c(t) / c(t + tau) * exp(-(I(t + tau) - I(t)))`` takes values in
``(0, 1]`` and does not depend on the scale of ``c``.

Before ``t = 0`` a transient ``z`` is held at ``z(0)``; a periodic ``z`` is
extended periodically.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ._steps import divisor_step, hermite, history_integral, integrate_steps, resolve_step
from .errors import (ConfigurationError, ConsistencyError, ConvergenceError,
                     DegenerateWashoutError, DomainError, RegimeError)
from .timefn import DEFAULT_TOL, TimeFunction, cumulative_simpson

DEFAULT_STEP = 0.01
PHI_RESIDUAL_TOL = 1e-5
MAX_STEPS = 4_000_000


# ---------------------------------------------------------------------- z
@dataclass(frozen=True)
class WashoutSolution:
    """``z`` on nodes ``k*dt`` with node derivatives; callable anywhere it is defined."""

    t: np.ndarray
    z: np.ndarray
    dz: np.ndarray
    z0: float
    closed_form_used: bool
    period: float = None

    @property
    def dt(self):
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0

    @property
    def t_end(self):
        return float(self.t[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.period is not None:
            u = np.mod(t, self.period)
            out = hermite(0.0, self.dt, self.z, self.dz, np.minimum(u, self.t_end))
        else:
            if np.any(t > self.t_end * (1 + 1e-12) + 1e-12):
                raise DomainError(f"washout solution only computed up to t={self.t_end:g}")
            out = np.where(t < 0, self.z0,
                           hermite(0.0, self.dt, self.z, self.dz, np.clip(t, 0.0, self.t_end)))
        return float(out) if out.ndim == 0 else out


def _closed_form(model, z0, dt, n):
    """Exact variation-of-constants recursion with Simpson cells."""
    Ih = cumulative_simpson(model.D, 0.0, 0.5 * dt, 2 * n)
    th = 0.5 * dt * np.arange(2 * n + 1)
    q = model.s0(th) * model.D(th)
    I = Ih[::2]
    Iend = I[1:]
    # inhomogeneous part accumulated over each cell, discounted to the cell end
    b = (dt / 6.0) * (q[0:-1:2] * np.exp(I[:-1] - Iend)
                      + 4.0 * q[1::2] * np.exp(Ih[1::2] - Iend)
                      + q[2::2])
    z = np.empty(n + 1)
    z[0] = z0
    # blockwise closed form keeps exponents bounded
    s = 0
    while s < n:
        e = min(n, int(np.searchsorted(I, I[s] + 500.0, side="right")) - 1)
        e = max(e, s + 1)
        rel = I[s:e + 1] - I[s]
        acc = np.concatenate([[0.0], np.cumsum(b[s:e] * np.exp(rel[1:]))])
        z[s:e + 1] = np.exp(-rel) * (z[s] + acc)
        s = e
    return z


def _rk4_washout(model, z0, dt, n):
    th = 0.5 * dt * np.arange(2 * n + 1)
    Dl = model.D(th).tolist()
    s0l = model.s0(th).tolist()

    def rhs(j, y, yd):
        return ((s0l[j] - y[0]) * Dl[j],)

    Y, _, _ = integrate_steps(rhs, (z0,), [], dt, 0, n)
    return Y[:, 0]


def washout_solution(model, z0, t_end, dt=DEFAULT_STEP, method="closed"):
    """Organism-free nutrient ``z`` with ``z(0) = z0`` on ``[0, t_end]``.

    ``method="closed"`` evaluates the variation-of-constants formula cell by
    cell with Simpson's rule; ``method="rk4"`` integrates the ODE.  The two
    agree to ``O(dt^4)``.
    """
    z0 = float(z0)
    if not z0 > 0:
        raise DomainError(f"z0 must be positive, got {z0}")
    n = max(1, math.ceil(t_end / dt - 1e-9))
    if method == "closed":
        z = _closed_form(model, z0, dt, n)
    elif method == "rk4":
        z = _rk4_washout(model, z0, dt, n)
    else:
        raise DomainError(f"unknown method {method!r}")
    t = dt * np.arange(n + 1)
    dz = (model.s0(t) - z) * model.D(t)
    return WashoutSolution(t, z, dz, z0, method == "closed")


def check_period(f, omega, name="signal"):
    """Raise unless ``f`` is constant or periodic with a period dividing ``omega``."""
    if f.is_constant:
        return
    if not f.is_periodic:
        raise RegimeError(f"{name} is not periodic")
    r = omega / f.period
    if abs(r - round(r)) > 1e-9 * max(1.0, r) or round(r) < 1:
        raise ConfigurationError(
            f"{name} has period {f.period:g}, which does not divide omega={omega:g}")


def periodic_washout(model, omega, dt=None):
    """The unique ``omega``-periodic washout solution.

    Its initial value solves ``z(0) = z(omega)`` in closed form:
    ``z(0) = int_0^w s0 D exp(-int_u^w D) du / (1 - exp(-int_0^w D))``.
    """
    omega = float(omega)
    if not omega > 0:
        raise DomainError("omega must be positive")
    check_period(model.s0, omega, "s0")
    check_period(model.D, omega, "D")
    dt = DEFAULT_STEP if dt is None else dt
    K = max(16, math.ceil(omega / dt - 1e-9))
    dt = omega / K
    total_D = cumulative_simpson(model.D, 0.0, omega / (4 * K), 4 * K)[-1]
    if not total_D > 0:
        raise DegenerateWashoutError("washout rate integrates to zero over one period")
    zero_start = _closed_form_from_zero(model, dt, K)
    zstar = zero_start / (-math.expm1(-total_D))
    sol = washout_solution(model, zstar, omega, dt)
    gap = abs(sol.z[0] - sol.z[-1])
    if gap >= 1e-8:
        raise ConsistencyError(f"periodic washout mismatch |z(0)-z(omega)| = {gap:.3g}")
    return WashoutSolution(sol.t, sol.z, sol.dz, zstar, True, period=omega)


def _closed_form_from_zero(model, dt, n):
    # value at t = n*dt of the solution started from 0; z0 = 0 is allowed here
    return float(_closed_form(model, 0.0, dt, n)[-1])


# ---------------------------------------------------------------------- c
@dataclass(frozen=True)
class CSolution:
    """``c`` and cumulative washout ``I`` on ``t = -tau, ..., t_end``.

    ``start`` is the index of ``t = 0``.  ``dc``/``dI`` are node derivatives for
    ``t >= 0``.  Stored ``c`` equals the true ``c`` divided by ``2**log2_scale``.
    """

    t: np.ndarray
    c: np.ndarray
    I: np.ndarray
    dc: np.ndarray
    dI: np.ndarray
    h: float
    m: int
    log2_scale: int
    tau: float

    @property
    def start(self):
        return self.m

    @property
    def t_end(self):
        return float(self.t[-1])

    def c_at(self, t):
        """Hermite-interpolated ``c`` for ``t >= 0``."""
        return hermite(0.0, self.h, self.c[self.m:], self.dc, t)

    def I_at(self, t):
        return hermite(0.0, self.h, self.I[self.m:], self.dI, t)

    def psi_at(self, t):
        """``c(t)/c(t+tau) * exp(-(I(t+tau)-I(t)))`` for ``t >= 0``."""
        t = np.asarray(t, dtype=float)
        ta = t + self.tau
        return self.c_at(t) / self.c_at(ta) * np.exp(self.I_at(t) - self.I_at(ta))


def _c_history_samples(c_history, tH):
    if c_history is None:
        return np.ones_like(tH)
    if callable(c_history):
        v = np.asarray(c_history(tH), dtype=float) * np.ones_like(tH)
    elif np.ndim(c_history) == 0:
        v = np.full_like(tH, float(c_history))
    else:
        ts, vs = c_history
        v = np.interp(tH, np.asarray(ts, float), np.asarray(vs, float))
    return v


def c_solution(model, z, c_history=None, t_end=None, h=DEFAULT_STEP):
    """Integrate the linear delay equation for ``c`` by the method of steps.

    Parameters
    ----------
    z : WashoutSolution
    c_history : None, float, callable or (t, values)
        Data on ``[-tau, 0]``; default is the constant 1.  Must be ``>= 0``
        with a positive value at ``t = 0``.
    h : float
        Step; must divide ``tau``.
    """
    if t_end is None or not t_end > 0:
        raise DomainError("t_end must be positive")
    tau = model.tau
    h, m = resolve_step(tau, h)
    n = max(1, math.ceil(t_end / h - 1e-9))
    if n > MAX_STEPS:
        raise ConfigurationError(
            f"{n} steps of h={h:.3g} needed up to t={t_end:g} (budget {MAX_STEPS}); "
            "the delay is too short for the horizon")
    tH = 0.5 * h * (np.arange(2 * m + 1) - 2 * m)
    cH = _c_history_samples(c_history, tH)
    if np.any(cH < 0) or not cH[-1] > 0 or not np.all(np.isfinite(cH)):
        raise DomainError("c history must be non-negative with c(0) > 0")

    th = 0.5 * h * np.arange(2 * n + 1)
    Dl = model.D(th).tolist()
    pz = model.p(z(th - tau)).tolist()
    exp = math.exp

    def rhs(j, y, yd):
        D = Dl[j]
        return (-D * y[0] + yd[0] * pz[j] * exp(yd[1] - y[1]), D)

    hist = list(zip(cH, history_integral(model, h, m))) if m else []
    Y, F, log2_scale = integrate_steps(rhs, (cH[-1], 0.0), hist, h, m, n,
                                       nonneg=(0,), renorm=0)
    if not np.all(Y[:, 0] > 0):
        raise ConsistencyError("c lost positivity; the step is too coarse")
    if m:
        pre_c = np.ldexp(cH[0:-1:2], -log2_scale)
        pre_I = history_integral(model, h, m)[0:-1:2]
        pre_t = h * (np.arange(m) - m)
    else:
        pre_c = pre_I = pre_t = np.empty(0)
    return CSolution(
        t=np.concatenate([pre_t, h * np.arange(n + 1)]),
        c=np.concatenate([pre_c, Y[:, 0]]),
        I=np.concatenate([pre_I, Y[:, 1]]),
        dc=F[:, 0], dI=F[:, 1], h=h, m=m, log2_scale=log2_scale, tau=tau,
    )


# ---------------------------------------------------------------------- phi
@dataclass(frozen=True)
class PhiFunction:
    """Weight ``phi`` sampled on ``t`` with its construction metadata.

    ``regime`` is ``"transient"``, ``"periodic"`` or ``"constant"``.  Periodic
    samples cover ``[0, period]`` with equal end values.  ``trace`` holds
    successive sup-norm differences of period-shifted restrictions.
    """

    t: np.ndarray
    phi: np.ndarray
    regime: str
    residual: float
    c: np.ndarray = None
    period: float = None
    trace: np.ndarray = None
    info: dict = field(default_factory=dict)
    _spline: object = field(default=None, repr=False, compare=False)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.regime == "constant":
            out = np.full(t.shape, self.phi[0])
        elif self.regime == "periodic":
            out = self._spline(np.mod(t, self.period))
        else:
            lo = self.info["t_neg"][0]
            if np.any(t < lo - 1e-9) or np.any(t > self.t[-1] + 1e-9):
                raise DomainError(f"phi only available on [{lo:g}, {self.t[-1]:g}]")
            out = np.where(t >= 0, self._spline(np.clip(t, 0, None)),
                           np.interp(t, self.info["t_neg"], self.info["phi_neg"]))
        return float(out) if out.ndim == 0 else out


def _transient_phi(csol):
    """phi on the half grid of ``[0, t_end - tau]`` and on the nodes of ``[-tau, 0]``."""
    tau, h, m = csol.tau, csol.h, csol.m
    t_last = csol.t_end - tau
    nh = int(round(t_last / (0.5 * h)))
    th = 0.5 * h * np.arange(nh + 1)
    phi_h = csol.psi_at(th) if m else np.ones_like(th)
    c, I = csol.c, csol.I
    t_neg = csol.t[: m + 1]
    phi_neg = c[: m + 1] / c[m: 2 * m + 1] * np.exp(I[: m + 1] - I[m: 2 * m + 1])
    return th, phi_h, t_neg, phi_neg


def _half_grid_residual(th, phi_h, pz_h, m):
    """``max |phi - exp(-int_{t-tau}^t p(z) phi)|`` on nodes with ``t >= tau`` (Simpson cells)."""
    if m == 0:
        return float(np.max(np.abs(phi_h - 1.0)))
    g = pz_h * phi_h
    dt = th[2] - th[0]
    cells = (dt / 6.0) * (g[0:-1:2] + 4.0 * g[1::2] + g[2::2])
    G = np.concatenate([[0.0], np.cumsum(cells)])
    if G.size <= m:
        return 0.0
    phin = phi_h[::2]
    return float(np.max(np.abs(phin[m:] - np.exp(-(G[m:] - G[:-m])))))


def phi_from_c(csol, model, z, tol=PHI_RESIDUAL_TOL):
    """phi from a computed ``c`` on ``[-tau, t_end - tau]``.

    Raises
    ------
    ConsistencyError
        When the self-consistency residual exceeds ``tol`` or phi leaves (0, 1].
    """
    th, phi_h, t_neg, phi_neg = _transient_phi(csol)
    resid = _half_grid_residual(th, phi_h, model.p(z(th)), csol.m)
    _check_range(phi_h)
    if resid > tol:
        raise ConsistencyError(
            f"phi self-consistency residual {resid:.3g} exceeds {tol:.3g}; refine the grid")
    phi_h = np.minimum(phi_h, 1.0)
    spline = CubicSpline(th, phi_h) if th.size > 2 else (lambda u: np.interp(u, th, phi_h))
    nodes = th[::2]
    c_nodes = csol.c[csol.m: csol.m + nodes.size]
    return PhiFunction(t=nodes, phi=phi_h[::2], regime="transient", residual=resid,
                       c=c_nodes, info={"t_neg": t_neg, "phi_neg": np.minimum(phi_neg, 1.0),
                                        "h": csol.h},
                       _spline=spline)


def _check_range(phi):
    if not (np.all(phi > 0) and np.all(phi <= 1 + 1e-9)):
        raise ConsistencyError(
            f"phi left (0, 1]: min {phi.min():.3g}, max {phi.max():.3g}")


def phi_transient(model, z0=None, t_end=100.0, h=DEFAULT_STEP, c_history=None,
                  tol=PHI_RESIDUAL_TOL):
    """Convenience: washout, ``c`` and phi on ``[0, t_end]`` in one call."""
    h = divisor_step(model.tau, h)
    if z0 is None:
        z0 = model.s0(0.0) if model.s0(0.0) > 0 else 1.0
    z = washout_solution(model, z0, t_end + 2 * model.tau + h, 0.5 * h)
    csol = c_solution(model, z, c_history, t_end + model.tau, h)
    return phi_from_c(csol, model, z, tol), z, csol


def phi_constant(P, tau, tol=1e-12):
    """Root in ``(0, 1]`` of ``phi = exp(-P tau phi)`` by bisection.

    ``phi - exp(-P tau phi)`` is strictly increasing and changes sign on
    ``[exp(-P tau), 1]``.
    """
    P = float(P)
    tau = float(tau)
    if P < 0 or tau < 0:
        raise DomainError("P and tau must be non-negative")
    a = P * tau
    if a == 0:
        return 1.0
    lo, hi = math.exp(-a), 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid - math.exp(-a * mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol * 1e-3:
            break
    return 0.5 * (lo + hi)


def _phase_grid(omega, h):
    K = int(min(max(64, math.ceil(omega / (0.5 * h))), 40000))
    K += K % 2
    return omega * np.arange(K + 1) / K


def phi_periodic(model, z, omega, tol=1e-9, h=DEFAULT_STEP, min_periods=20,
                 max_periods=640, c_history=None, residual_tol=PHI_RESIDUAL_TOL):
    """The unique periodic phi as the limit of period-shifted restrictions of ``psi``.

    ``c`` is integrated for ``N = max(min_periods, periods until I >= 30)``
    periods (doubling ``N`` if needed) and ``psi_n(theta) = psi(theta + n*omega)``
    compared across periods until the sup-norm difference drops below ``tol``.
    The last period is returned, made exactly periodic by averaging its end
    values, and its self-consistency residual re-checked.

    Raises
    ------
    ConvergenceError
        ``max_periods`` periods were not enough.
    """
    omega = float(omega)
    check_period(model.s0, omega, "s0")
    check_period(model.D, omega, "D")
    if z.period is None or abs(z.period - omega) > 1e-9 * omega:
        raise ConfigurationError("phi_periodic needs the omega-periodic washout solution")
    tau = model.tau
    h = divisor_step(tau, h)
    theta = _phase_grid(omega, h)
    if tau == 0:
        phi = np.ones_like(theta)
        return _periodic_result(model, z, theta, phi, omega, tau, np.zeros(0), 0.0, {})

    mean_D = model.D.average(omega) if not model.D.is_constant else model.D.value
    n_periods = max(min_periods, math.ceil(30.0 / (omega * mean_D)) if mean_D > 0 else min_periods)
    while True:
        csol = c_solution(model, z, c_history, n_periods * omega + tau + h, h)
        prev = csol.psi_at(theta)
        trace = []
        for k in range(1, n_periods):
            cur = csol.psi_at(theta + k * omega)
            trace.append(float(np.max(np.abs(cur - prev))))
            prev = cur
        trace = np.array(trace)
        below = np.flatnonzero(trace < tol)
        if below.size:
            break
        if n_periods >= max_periods:
            raise ConvergenceError(
                f"periodic phi not converged after {n_periods} periods "
                f"(last difference {trace[-1]:.3g} > {tol:.3g})")
        n_periods = min(2 * n_periods, max_periods)

    phi = prev.copy()
    gap = abs(phi[0] - phi[-1])
    end = 0.5 * (phi[0] + phi[-1])
    phi[0] = phi[-1] = end
    info = {"periods": n_periods, "h": h, "full_trace": trace, "end_gap": float(gap)}
    # differences after the first one below tol sit at the interpolation floor
    trace = trace[: below[0] + 1]
    info.update(geometric_decay(trace))
    resid = None
    return _periodic_result(model, z, theta, phi, omega, tau, trace, resid, info,
                            residual_tol=residual_tol, c_last=csol.c_at(theta + (n_periods - 1) * omega))


def geometric_decay(trace):
    """Largest recent ratio of successive differences and where strict decrease starts."""
    d = np.asarray(trace, dtype=float)
    if d.size < 2:
        return {"decay_ratio": 0.0, "monotone_from": 0, "monotone_tail": True}
    r = d[1:] / d[:-1]
    k = d.size - 1
    while k > 0 and d[k] < d[k - 1]:
        k -= 1
    return {"decay_ratio": float(np.max(r[-min(5, r.size):])),
            "monotone_from": int(k), "monotone_tail": bool(d.size - k >= min(3, d.size))}


def _periodic_result(model, z, theta, phi, omega, tau, trace, resid, info,
                     residual_tol=PHI_RESIDUAL_TOL, c_last=None):
    _check_range(phi)
    phi = np.minimum(phi, 1.0)
    spline = CubicSpline(theta, phi, bc_type="periodic")
    if tau > 0:
        resid = periodic_residual(spline, lambda u: model.p(z(u)), theta, omega, tau)
        if resid > residual_tol:
            raise ConsistencyError(
                f"periodic phi residual {resid:.3g} exceeds {residual_tol:.3g}")
    else:
        resid = 0.0
    return PhiFunction(t=theta, phi=phi, regime="periodic", residual=float(resid),
                       c=c_last, period=omega, trace=trace, info=info, _spline=spline)


def periodic_residual(phi_spline, pz, theta, omega, tau):
    """``max |phi - exp(-int_{t-tau}^t p(z) phi)|`` for a periodic spline ``phi``."""
    return float(np.max(_periodic_residual_series(phi_spline, pz, theta, omega, tau)))


def residual_series(phi, model, z):
    """Pointwise ``|phi(t) - exp(-int_{t-tau}^t p(z) phi)|`` on ``phi.t``.

    Transient weights have no value for ``t < tau``; those entries are NaN.
    """
    tau = model.tau
    if phi.regime == "constant":
        return np.full(phi.t.shape, phi.residual)
    if tau == 0:
        return np.abs(phi.phi - 1.0)
    if phi.regime == "periodic":
        return _periodic_residual_series(phi._spline, lambda u: model.p(z(u)), phi.t,
                                         phi.period, tau)
    h = phi.info["h"]
    m = int(round(tau / h))
    th = 0.5 * h * np.arange(2 * (phi.t.size - 1) + 1)
    g = model.p(z(th)) * phi(th)
    cells = (h / 6.0) * (g[0:-1:2] + 4.0 * g[1::2] + g[2::2])
    G = np.concatenate([[0.0], np.cumsum(cells)])
    out = np.full(phi.t.size, np.nan)
    if G.size > m:
        out[m:] = np.abs(phi.phi[m:] - np.exp(-(G[m:] - G[:-m])))
    return out


def _periodic_residual_series(phi_spline, pz, theta, omega, tau):
    g = CubicSpline(theta, pz(theta) * phi_spline(theta), bc_type="periodic")
    G = g.antiderivative()
    total = float(G(omega) - G(0.0))

    def prim(x):
        q = np.floor(x / omega)
        return q * total + (G(x - q * omega) - G(0.0))

    win = prim(theta) - prim(theta - tau)
    return np.abs(phi_spline(theta) - np.exp(-win))


def constant_phi_function(P, tau):
    """phi for constant data as a :class:`PhiFunction` (regime ``"constant"``)."""
    v = phi_constant(P, tau)
    return PhiFunction(t=np.zeros(1), phi=np.array([v]), regime="constant",
                       residual=abs(v - math.exp(-P * tau * v)))


def as_time_function(phi):
    """Periodic phi as a :class:`TimeFunction` sampled on its phase grid."""
    if phi.regime != "periodic":
        raise RegimeError("only periodic phi converts to a periodic TimeFunction")
    return TimeFunction.periodic(phi.period, phi.phi[:-1])


__all__ = [
    "WashoutSolution", "washout_solution", "periodic_washout", "check_period", "residual_series",
    "CSolution", "c_solution", "PhiFunction", "phi_from_c", "phi_transient",
    "phi_periodic", "phi_constant", "constant_phi_function", "periodic_residual",
    "geometric_decay", "DEFAULT_TOL",
]
