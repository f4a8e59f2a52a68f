"""Structural data of the delayed chemostat: uptake law, coefficients, histories."""

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .timefn import TimeFunction


class UptakeFunction:
    """Specific growth rate ``p(s)`` with ``p(0) = 0`` and ``p' > 0``.

    Two kinds are available: ``monod`` (``m*s/(a+s)``) and a monotone table
    interpolated linearly (``tabulated``).  Beyond the last knot a table is
    continued with its last slope so that it stays strictly increasing.
    """

    def __init__(self, kind, *, m=None, a=None, s=None, p=None):
        self.kind = kind
        if kind == "monod":
            if not (m > 0 and a > 0):
                raise DomainError(f"Monod parameters must be positive, got m={m}, a={a}")
            self.m = float(m)
            self.a = float(a)
            m_, a_ = self.m, self.a
            self.scalar = lambda x: m_ * x / (a_ + x)
        elif kind == "tabulated":
            s = np.asarray(s, dtype=float).ravel()
            p = np.asarray(p, dtype=float).ravel()
            if s.size < 2 or s.size != p.size:
                raise DomainError("tabulated uptake needs >= 2 matching knots")
            if s[0] != 0.0 or p[0] != 0.0:
                raise DomainError("tabulated uptake must start at (0, 0)")
            if np.any(np.diff(s) <= 0):
                raise DomainError("uptake knots must be strictly increasing in s")
            if np.any(np.diff(p) <= 0):
                raise DomainError("uptake must be strictly increasing (p' > 0)")
            s.setflags(write=False)
            p.setflags(write=False)
            self.s_knots = s
            self.p_knots = p
            sl, pl = s.tolist(), p.tolist()
            last_slope = (pl[-1] - pl[-2]) / (sl[-1] - sl[-2])

            def scalar(x):
                if x >= sl[-1]:
                    return pl[-1] + last_slope * (x - sl[-1])
                if x <= 0.0:
                    return pl[1] / sl[1] * x
                i = bisect.bisect_right(sl, x) - 1
                w = (x - sl[i]) / (sl[i + 1] - sl[i])
                return pl[i] + w * (pl[i + 1] - pl[i])

            self.scalar = scalar
            self._last_slope = last_slope
        else:
            raise DomainError(f"unknown uptake kind {kind!r}")

    @classmethod
    def monod(cls, m, a):
        return cls("monod", m=m, a=a)

    @classmethod
    def tabulated(cls, s, p):
        return cls("tabulated", s=s, p=p)

    def __call__(self, s):
        return uptake_eval(self, s)

    def _raw(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "monod":
            return self.m * s / (self.a + s)
        out = np.interp(s, self.s_knots, self.p_knots)
        hi = s > self.s_knots[-1]
        return np.where(hi, self.p_knots[-1] + self._last_slope * (s - self.s_knots[-1]), out)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "monod":
            return self.m * self.a / (self.a + s) ** 2
        slopes = np.diff(self.p_knots) / np.diff(self.s_knots)
        i = np.clip(np.searchsorted(self.s_knots, s, side="right") - 1, 0, slopes.size - 1)
        return slopes[i]

    def to_dict(self):
        if self.kind == "monod":
            return {"kind": "monod", "m": self.m, "a": self.a}
        return {"kind": "table", "s": self.s_knots.tolist(), "p": self.p_knots.tolist()}

    def __repr__(self):
        if self.kind == "monod":
            return f"UptakeFunction.monod(m={self.m!r}, a={self.a!r})"
        return f"UptakeFunction.tabulated(n={self.s_knots.size})"


def uptake_eval(p, s):
    """Evaluate the uptake law ``p`` at concentration(s) ``s >= 0``."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0) or np.any(np.isnan(s_arr)):
        raise DomainError("uptake is only defined for s >= 0")
    out = p._raw(s_arr)
    return float(out) if np.ndim(s) == 0 else out


@dataclass(frozen=True)
class ChemostatModel:
    """Uptake law ``p``, input concentration ``s0(t)``, washout rate ``D(t)``, delay ``tau``."""

    p: UptakeFunction
    s0: TimeFunction
    D: TimeFunction
    tau: float = 0.0

    def __post_init__(self):
        tau = float(self.tau)
        if not (tau >= 0 and math.isfinite(tau)):
            raise DomainError(f"delay must be a finite non-negative number, got {self.tau}")
        object.__setattr__(self, "tau", tau)
        if not isinstance(self.s0, TimeFunction) or not isinstance(self.D, TimeFunction):
            raise DomainError("s0 and D must be TimeFunction instances")

    @property
    def is_constant(self):
        return self.s0.is_constant and self.D.is_constant

    def with_(self, **changes):
        """Copy with some fields replaced."""
        kw = dict(p=self.p, s0=self.s0, D=self.D, tau=self.tau)
        kw.update(changes)
        return ChemostatModel(**kw)

    def D_extended(self, t):
        """``D`` with the backward convention used for ``t < 0``.

        Where ``D`` is defined for negative times (constant, periodic, held
        tables) it is used as is; otherwise ``D(0)`` is assumed on ``[-tau, 0)``.
        """
        t = np.asarray(t, dtype=float)
        lo, _ = self.D.domain()
        if lo <= t.min(initial=0.0):
            return self.D(t)
        return self.D(np.maximum(t, lo))

    def D_integral(self, a, b):
        """``int_a^b D`` with :meth:`D_extended` on negative times."""
        lo, _ = self.D.domain()
        if a >= lo:
            return self.D.integrate(a, b)
        head = float(self.D(lo)) * (min(b, lo) - a)
        return head + (self.D.integrate(lo, b) if b > lo else 0.0)


@dataclass(frozen=True)
class History:
    """Initial data ``(s_in, x_in)`` on ``[-tau, 0]`` as piecewise-linear knots."""

    t: np.ndarray
    s: np.ndarray
    x: np.ndarray
    tau: float = field(init=False)

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        s = np.atleast_1d(np.asarray(self.s, dtype=float))
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if not (t.size == s.size == x.size) or t.size == 0:
            raise DomainError("history arrays must be non-empty and of equal length")
        if t[-1] != 0.0:
            raise DomainError("history must end at t = 0")
        if np.any(np.diff(t) <= 0):
            raise DomainError("history knot times must be strictly increasing")
        if np.any(s < 0) or np.any(x < 0) or not (np.all(np.isfinite(s)) and np.all(np.isfinite(x))):
            raise DomainError("initial conditions must be non-negative and finite")
        for a in (t, s, x):
            a.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "tau", float(-t[0]))

    @classmethod
    def constant(cls, s, x, tau):
        tau = float(tau)
        if tau == 0:
            return cls([0.0], [s], [x])
        return cls([-tau, 0.0], [s, s], [x, x])

    @classmethod
    def from_functions(cls, s_fn, x_fn, tau, n=101):
        """Sample callables on ``n`` uniform knots of ``[-tau, 0]``."""
        tau = float(tau)
        t = np.array([0.0]) if tau == 0 else np.linspace(-tau, 0.0, n)
        return cls(t, np.asarray(s_fn(t), float) * np.ones_like(t),
                   np.asarray(x_fn(t), float) * np.ones_like(t))

    def _interp(self, values, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t[0] - 1e-12 * max(1.0, self.tau)) or np.any(t > 1e-12 * max(1.0, self.tau)):
            raise DomainError(f"history queried outside [-{self.tau:g}, 0]")
        if self.t.size == 1:
            return np.full(t.shape, values[0])
        return np.interp(t, self.t, values)

    def s_at(self, t):
        return self._interp(self.s, t)

    def x_at(self, t):
        return self._interp(self.x, t)

    def scaled_x(self, k):
        return History(self.t, self.s, k * self.x)


def is_non_null(h):
    """Whether ``h`` can seed organism growth.

    True iff ``x_in(0) > 0`` or some ``t*`` in ``[-tau, 0]`` has both
    ``s_in(t*) > 0`` and ``x_in(t*) > 0``.  For piecewise-linear data with
    non-negative knots, checking knots and segment midpoints is exact.
    """
    if h.x[-1] > 0:
        return True
    pts = h.t
    if pts.size > 1:
        pts = np.concatenate([pts, 0.5 * (pts[1:] + pts[:-1])])
    s = h.s_at(pts)
    x = h.x_at(pts)
    return bool(np.any((s > 0) & (x > 0)))
