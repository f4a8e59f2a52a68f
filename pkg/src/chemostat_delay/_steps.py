"""Fixed-step RK4 for delay equations on a grid aligned with the delay.

The step ``h`` divides the delay (``tau = m*h``), so delayed values at whole
steps are plain reads of earlier nodes.  At half steps the delayed state is
the cubic Hermite midpoint of the bracketing nodes, built from the stored
node values and right-hand sides.  Stage times are indexed on the half grid
``t_j = j*h/2``.
"""

import math

import numpy as np

from .errors import ConfigurationError, IntegrationError
from .timefn import cumulative_simpson

NEG_CLAMP = 1e-12
_BIG = 2.0 ** 300
_SMALL = 2.0 ** -300


def integrate_steps(rhs, y0, hist, h, m, n_steps, nonneg=(), renorm=None):
    """March ``y' = rhs(j, y, y_delayed)`` for ``n_steps`` steps of size ``h``.

    Parameters
    ----------
    rhs : callable
        ``rhs(j, y, yd)`` returns the derivative tuple at half-grid index ``j``;
        ``y`` and ``yd`` are tuples of floats (current and delayed state).
    y0 : tuple
        State at ``t = 0``.
    hist : sequence of tuples
        State on the half grid of ``[-tau, 0]`` (``2*m + 1`` entries, oldest first).
        Ignored when ``m == 0``.
    m : int
        Delay in steps; ``m == 0`` feeds the current stage state as the delayed one.
    nonneg : tuple of int
        Components clamped at zero after tiny negative undershoot.
    renorm : int, optional
        Component of a linear homogeneous equation that may be rescaled by
        powers of two to avoid overflow/underflow.

    Returns
    -------
    Y, F : ndarray
        Node states and node derivatives, shape ``(n_steps + 1, dim)``.
    log2_scale : int
        Total power of two divided out of component ``renorm``.
    """
    hist = [tuple(float(v) for v in e) for e in hist] if m > 0 else []
    Y = [tuple(float(v) for v in y0)]
    F = []
    h2 = 0.5 * h
    h6 = h / 6.0
    h8 = h / 8.0
    two_m = 2 * m
    log2_scale = 0

    def delayed(j):
        d = j - two_m
        if d <= 0:
            return hist[d + two_m]
        if d % 2 == 0:
            return Y[d // 2]
        a = d // 2
        ya, yb, fa, fb = Y[a], Y[a + 1], F[a], F[a + 1]
        return tuple(0.5 * (p + q) + h8 * (u - w) for p, q, u, w in zip(ya, yb, fa, fb))

    for k in range(n_steps):
        y = Y[k]
        j = 2 * k
        k1 = rhs(j, y, delayed(j) if m else y)
        F.append(k1)
        y2 = tuple(a + h2 * b for a, b in zip(y, k1))
        yd = delayed(j + 1) if m else None
        k2 = rhs(j + 1, y2, yd if m else y2)
        y3 = tuple(a + h2 * b for a, b in zip(y, k2))
        k3 = rhs(j + 1, y3, yd if m else y3)
        y4 = tuple(a + h * b for a, b in zip(y, k3))
        k4 = rhs(j + 2, y4, delayed(j + 2) if m else y4)
        new = [a + h6 * (b + 2.0 * c + 2.0 * d + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4)]
        t_new = (k + 1) * h
        for i, v in enumerate(new):
            if not math.isfinite(v):
                raise IntegrationError("non-finite state", t_new)
        for i in nonneg:
            v = new[i]
            if v < 0.0:
                if v >= -NEG_CLAMP * max(1.0, abs(y[i])):
                    new[i] = 0.0
                else:
                    raise IntegrationError(f"component {i} went negative ({v:.3g})", t_new)
        Y.append(tuple(new))
        if renorm is not None:
            c = abs(new[renorm])
            if c > _BIG or 0.0 < c < _SMALL:
                e = math.frexp(c)[1]
                log2_scale += e
                Y, F, hist = _rescale(Y, F, hist, renorm, e)
    j = 2 * n_steps
    F.append(rhs(j, Y[-1], delayed(j) if m else Y[-1]))
    return np.array(Y), np.array(F), log2_scale


def _rescale(Y, F, hist, idx, e):
    def sc(rows):
        return [r[:idx] + (math.ldexp(r[idx], -e),) + r[idx + 1:] for r in rows]
    return sc(Y), sc(F), sc(hist)


def hermite(t0, h, y, dy, tq):
    """Piecewise cubic Hermite interpolant of node data on ``t0 + k*h``.

    ``tq`` is clipped to the node range up to a rounding margin.
    """
    tq = np.asarray(tq, dtype=float)
    n = y.shape[0] - 1
    x = (tq - t0) / h
    lo_tol = 1e-9
    if np.any(x < -lo_tol) or np.any(x > n + lo_tol):
        raise ValueError("Hermite query outside node range")
    i = np.clip(np.floor(x).astype(np.int64), 0, max(n - 1, 0))
    if n == 0:
        return np.full(tq.shape, y[0])
    u = np.clip(x - i, 0.0, 1.0)
    u2 = u * u
    u3 = u2 * u
    h00 = 2 * u3 - 3 * u2 + 1
    h10 = u3 - 2 * u2 + u
    h01 = -2 * u3 + 3 * u2
    h11 = u3 - u2
    return h00 * y[i] + h10 * h * dy[i] + h01 * y[i + 1] + h11 * h * dy[i + 1]


def node_index(t, t0, h, n):
    """Index of the node nearest ``t`` on ``t0 + k*h`` (``0 <= k <= n``)."""
    k = int(round((t - t0) / h))
    return min(max(k, 0), n)


def resolve_step(tau, h, rtol=1e-9):
    """Return ``(h, m)`` with ``tau == m*h`` exactly, or raise.

    ``h`` must already divide ``tau`` up to ``rtol``; the returned step is
    ``tau / m`` so that delayed reads hit nodes exactly.
    """
    h = float(h)
    if not h > 0:
        raise ConfigurationError(f"step must be positive, got {h}")
    if tau == 0:
        return h, 0
    m = int(round(tau / h))
    if m < 1 or abs(m * h - tau) > rtol * tau:
        raise ConfigurationError(f"step h={h:g} does not divide the delay tau={tau:g}")
    return tau / m, m


def divisor_step(tau, h):
    """Largest step ``<= h`` dividing ``tau`` (``h`` itself when ``tau == 0``)."""
    if tau == 0:
        return float(h)
    m = max(1, math.ceil(tau / h - 1e-9))
    return tau / m


def history_integral(model, h, m):
    """``I(t) = -int_t^0 D`` on the half grid of ``[-tau, 0]`` (``2m + 1`` points)."""
    if m == 0:
        return np.zeros(1)
    tau = m * h
    J = cumulative_simpson(model.D_extended, -tau, 0.5 * h, 2 * m)
    return J - J[-1]
