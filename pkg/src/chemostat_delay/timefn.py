"""Non-negative time signals and the quadrature used throughout the package.

A :class:`TimeFunction` is one of three kinds:

``constant``
    a single value for every ``t``;
``periodic``
    ``n`` samples at ``t_k = k * period / n`` covering ``[0, period)``,
    linearly interpolated and wrapped around;
``tabulated``
    strictly increasing knots with linear interpolation and an optional
    extrapolation rule (``None`` raises outside the knot range, ``"hold"``
    repeats the end values).

All evaluation is vectorised over numpy arrays.
"""

import math

import numpy as np

from .errors import ConvergenceError, DomainError

DEFAULT_TOL = 1e-8

_KINDS = ("constant", "periodic", "tabulated")


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class TimeFunction:
    """Immutable non-negative scalar signal of time.

    Use the constructors :meth:`constant`, :meth:`periodic`, :meth:`sampled`
    and :meth:`tabulated` rather than calling the class directly.
    """

    __slots__ = ("kind", "value", "period", "times", "values", "extrapolation")

    def __init__(self, kind, *, value=None, period=None, times=None, values=None,
                 extrapolation=None):
        if kind not in _KINDS:
            raise DomainError(f"unknown TimeFunction kind {kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "value", None if value is None else float(value))
        object.__setattr__(self, "period", None if period is None else float(period))
        object.__setattr__(self, "times", None if times is None else _readonly(times))
        object.__setattr__(self, "values", None if values is None else _readonly(values))
        object.__setattr__(self, "extrapolation", extrapolation)

    def __setattr__(self, name, val):
        raise AttributeError("TimeFunction is immutable")

    # ------------------------------------------------------------------ construction
    @classmethod
    def constant(cls, value):
        value = float(value)
        if not math.isfinite(value) or value < 0:
            raise DomainError(f"constant value must be finite and >= 0, got {value}")
        return cls("constant", value=value)

    @classmethod
    def periodic(cls, period, samples):
        """Periodic signal from ``samples`` taken uniformly on ``[0, period)``."""
        period = float(period)
        if not (period > 0 and math.isfinite(period)):
            raise DomainError(f"period must be positive, got {period}")
        samples = np.asarray(samples, dtype=float).ravel()
        if samples.size < 2:
            raise DomainError("a periodic signal needs at least 2 samples")
        if not np.all(np.isfinite(samples)) or samples.min() < 0:
            raise DomainError("periodic samples must be finite and >= 0")
        return cls("periodic", period=period, values=samples)

    @classmethod
    def sampled(cls, fn, period, n=4096):
        """Periodic signal obtained by sampling the callable ``fn`` ``n`` times per period.

        Tiny negative samples produced by rounding (``> -1e-14``) are set to zero.
        """
        t = np.arange(n) * (float(period) / n)
        v = np.asarray(fn(t), dtype=float) * np.ones_like(t)
        v = np.where((v < 0) & (v > -1e-14), 0.0, v)
        return cls.periodic(period, v)

    @classmethod
    def tabulated(cls, times, values, extrapolation=None):
        times = np.asarray(times, dtype=float).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if times.size == 0 or times.size != values.size:
            raise DomainError("tabulated signal needs equally many (>=1) knots and values")
        if np.any(np.diff(times) <= 0):
            raise DomainError("knot times must be strictly increasing")
        if not np.all(np.isfinite(values)) or values.min() < 0:
            raise DomainError("tabulated values must be finite and >= 0")
        if extrapolation not in (None, "hold"):
            raise DomainError(f"unknown extrapolation rule {extrapolation!r}")
        return cls("tabulated", times=times, values=values, extrapolation=extrapolation)

    # ------------------------------------------------------------------ queries
    @property
    def is_constant(self):
        return self.kind == "constant"

    @property
    def is_periodic(self):
        return self.kind == "periodic"

    def domain(self):
        """Closed interval on which the signal is defined, as ``(lo, hi)``."""
        if self.kind == "tabulated" and self.extrapolation is None:
            return float(self.times[0]), float(self.times[-1])
        return -math.inf, math.inf

    def covers(self, a, b):
        lo, hi = self.domain()
        return lo <= a and b <= hi

    def max_value(self):
        return self.value if self.kind == "constant" else float(self.values.max())

    def min_value(self):
        return self.value if self.kind == "constant" else float(self.values.min())

    def scaled(self, k):
        """The signal multiplied by ``k >= 0``."""
        k = float(k)
        if k < 0:
            raise DomainError("scale factor must be >= 0")
        if self.kind == "constant":
            return TimeFunction.constant(k * self.value)
        if self.kind == "periodic":
            return TimeFunction.periodic(self.period, k * self.values)
        return TimeFunction.tabulated(self.times, k * self.values, self.extrapolation)

    # ------------------------------------------------------------------ evaluation
    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        """Value at ``t`` (scalar or array)."""
        t_arr = np.asarray(t, dtype=float)
        if self.kind == "constant":
            out = np.full(t_arr.shape, self.value)
        elif self.kind == "periodic":
            n = self.values.size
            u = np.mod(t_arr, self.period)
            x = u * (n / self.period)
            i = np.floor(x).astype(np.int64)
            # rounding can push x to exactly n
            i = np.minimum(i, n - 1)
            w = x - i
            v = self.values
            out = (1.0 - w) * v[i] + w * v[(i + 1) % n]
        else:
            lo, hi = self.times[0], self.times[-1]
            if self.extrapolation is None and (np.any(t_arr < lo) or np.any(t_arr > hi)):
                raise DomainError(
                    f"t outside tabulated range [{lo:g}, {hi:g}] and no extrapolation rule")
            if self.times.size == 1:
                out = np.full(t_arr.shape, self.values[0])
            else:
                out = np.interp(t_arr, self.times, self.values)
        if np.ndim(t) == 0:
            return float(out)
        return out

    def integrate(self, a, b, tol=DEFAULT_TOL):
        """Integral over ``[a, b]``.

        The signal is linear between knots, so one Simpson panel per piece is
        exact; ``tol`` is accepted for interface symmetry with :func:`simpson`.
        """
        a, b = float(a), float(b)
        if tol <= 0:
            raise DomainError("tol must be positive")
        if b < a:
            raise DomainError(f"integration bounds must satisfy a <= b, got [{a}, {b}]")
        if a == b:
            return 0.0
        if self.kind == "constant":
            return self.value * (b - a)
        x = np.concatenate([[a], self.breakpoints(a, b), [b]])
        fx = self.eval(x)
        fm = self.eval(0.5 * (x[1:] + x[:-1]))
        return float(np.sum(np.diff(x) / 6.0 * (fx[:-1] + 4.0 * fm + fx[1:])))

    def cumulative(self, t):
        """Exact running integral from ``t[0]`` at the increasing times ``t``."""
        t = np.asarray(t, dtype=float)
        if t.size == 0:
            return np.empty(0)
        if self.kind == "constant":
            return self.value * (t - t[0])
        x = np.union1d(t, self.breakpoints(t[0], t[-1]))
        fx = self.eval(x)
        fm = self.eval(0.5 * (x[1:] + x[:-1]))
        run = np.concatenate([[0.0], np.cumsum(np.diff(x) / 6.0 * (fx[:-1] + 4.0 * fm + fx[1:]))])
        return run[np.searchsorted(x, t)]

    def breakpoints(self, a, b):
        """Knot times strictly inside ``(a, b)``, where the slope may jump."""
        if self.kind == "constant":
            return np.empty(0)
        if self.kind == "tabulated":
            k = self.times
            return k[(k > a) & (k < b)]
        step = self.period / self.values.size
        lo, hi = math.floor(a / step) + 1, math.ceil(b / step) - 1
        k = step * np.arange(lo, hi + 1)
        return k[(k > a) & (k < b)]

    def average(self, period=None, tol=DEFAULT_TOL):
        if period is None:
            if self.kind == "constant":
                return self.value
            if self.kind != "periodic":
                raise DomainError("average of a tabulated signal needs an explicit period")
            period = self.period
        period = float(period)
        if not period > 0:
            raise DomainError(f"averaging period must be positive, got {period}")
        return self.integrate(0.0, period, tol) / period

    # ------------------------------------------------------------------ serialisation
    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "periodic":
            return {"kind": "periodic", "period": self.period, "samples": self.values.tolist()}
        d = {"kind": "table", "t": self.times.tolist(), "v": self.values.tolist()}
        if self.extrapolation:
            d["extrapolation"] = self.extrapolation
        return d

    def __repr__(self):
        if self.kind == "constant":
            return f"TimeFunction.constant({self.value!r})"
        if self.kind == "periodic":
            return f"TimeFunction.periodic(period={self.period!r}, n={self.values.size})"
        return f"TimeFunction.tabulated(n={self.times.size}, extrapolation={self.extrapolation!r})"

    def __eq__(self, other):
        if not isinstance(other, TimeFunction) or other.kind != self.kind:
            return NotImplemented
        if self.kind == "constant":
            return self.value == other.value
        if self.kind == "periodic":
            return self.period == other.period and np.array_equal(self.values, other.values)
        return (self.extrapolation == other.extrapolation
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values))

    __hash__ = None


# ---------------------------------------------------------------------- quadrature
def _simpson_sum(fx, h):
    return h / 3.0 * (fx[0] + fx[-1] + 4.0 * fx[1:-1:2].sum() + 2.0 * fx[2:-1:2].sum())


def simpson(f, a, b, tol=DEFAULT_TOL, min_panels=16, max_panels=2 ** 22, full_output=False):
    """Composite Simpson rule with panel doubling.

    The number of panels is doubled until two successive estimates differ by
    at most ``tol``.  ``f`` must accept a numpy array.

    Returns
    -------
    value : float
        The final (finest) estimate.
    err : float
        Difference between the last two estimates; only when ``full_output``.
    """
    a = float(a)
    b = float(b)
    if tol <= 0:
        raise DomainError("tol must be positive")
    if b < a:
        raise DomainError(f"integration bounds must satisfy a <= b, got [{a}, {b}]")
    if a == b:
        return (0.0, 0.0) if full_output else 0.0
    n = max(2, min_panels + (min_panels % 2))
    x = np.linspace(a, b, n + 1)
    fx = np.asarray(f(x), dtype=float) * np.ones_like(x)
    prev = _simpson_sum(fx, (b - a) / n)
    while True:
        n2 = 2 * n
        h = (b - a) / n2
        mid = a + h * np.arange(1, n2, 2)
        fm = np.asarray(f(mid), dtype=float) * np.ones_like(mid)
        merged = np.empty(n2 + 1)
        merged[0::2] = fx
        merged[1::2] = fm
        fx = merged
        cur = _simpson_sum(fx, h)
        err = abs(cur - prev)
        n = n2
        if err <= tol:
            break
        if n >= max_panels:
            raise ConvergenceError(
                f"Simpson quadrature on [{a}, {b}] stalled at {n} panels (diff {err:.3g} > {tol:.3g})")
        prev = cur
    if not math.isfinite(cur):
        raise ConvergenceError("Simpson quadrature produced a non-finite value")
    return (cur, err) if full_output else cur


def integrate(f, a, b, tol=DEFAULT_TOL):
    """Integral of a :class:`TimeFunction` or vectorised callable over ``[a, b]``."""
    if isinstance(f, TimeFunction):
        return f.integrate(a, b, tol)
    return simpson(f, a, b, tol)


def average(f, period, tol=DEFAULT_TOL):
    """Mean value ``(1/period) * integral_0^period f``."""
    period = float(period)
    if not period > 0:
        raise DomainError(f"averaging period must be positive, got {period}")
    return integrate(f, 0.0, period, tol) / period


def evaluate(f, t):
    """Functional alias of :meth:`TimeFunction.eval`."""
    return f.eval(t)


def cumulative_simpson(f, t0, dt, n):
    """Running integral of ``f`` from ``t0`` at the points ``t0 + k*dt``, ``k = 0..n``.

    Each cell uses Simpson's rule with its own midpoint, which is what a
    classical RK4 step does for ``I' = f(t)``.
    """
    if n == 0:
        return np.zeros(1)
    t = t0 + (0.5 * dt) * np.arange(2 * n + 1)
    ft = np.asarray(f(t), dtype=float) * np.ones_like(t)
    cells = (dt / 6.0) * (ft[0:-1:2] + 4.0 * ft[1::2] + ft[2::2])
    out = np.empty(n + 1)
    out[0] = 0.0
    np.cumsum(cells, out=out[1:])
    return out
