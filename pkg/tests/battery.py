"""Scenario battery shared by the agreement tests.

Every entry has a criterion margin of more than 5% of the mean washout rate.
"""

import math

import numpy as np

from chemostat_delay import ChemostatModel, History, TimeFunction, UptakeFunction

TWO_PI = 2 * math.pi


def _const(m, a, s0, D, tau):
    return ChemostatModel(UptakeFunction.monod(m, a), TimeFunction.constant(s0),
                          TimeFunction.constant(D), tau)


def _per(m, a, s0, D, tau):
    f = lambda g: g if isinstance(g, TimeFunction) else TimeFunction.sampled(g, TWO_PI)
    return ChemostatModel(UptakeFunction.monod(m, a), f(s0), f(D), tau)


# (name, model, omega, expected verdict, t_end)
BATTERY = [
    ("const-p1-tau1", _const(2, 1, 1, 0.5, 1.0), None, "persistent", 300.0),
    ("const-p1-tau2", _const(2, 1, 1, 0.5, 2.0), None, "not-persistent", 600.0),
    ("const-p05-D03", _const(1, 1, 1, 0.3, 1.0), None, "persistent", 300.0),
    ("const-p05-D04", _const(1, 1, 1, 0.4, 1.0), None, "not-persistent", 900.0),
    ("const-p15-short", _const(3, 2, 2, 1.0, 0.3), None, "persistent", 300.0),
    ("const-p15-long", _const(3, 2, 2, 1.0, 0.6), None, "not-persistent", 300.0),
    ("per-sin-cos", _per(2, 1, lambda t: 1 + 0.5 * np.sin(t), lambda t: 0.5 + 0.25 * np.cos(t), 1.0),
     TWO_PI, "persistent", 300.0),
    ("counterexample", _per(TWO_PI, 1, TimeFunction.constant(1.0), lambda t: 1 - np.sin(t),
                            math.pi / 2), TWO_PI, "not-persistent", 40 * math.pi),
    ("per-no-delay", _per(1, 1, lambda t: 2 + np.sin(t), TimeFunction.constant(0.5), 0.0),
     TWO_PI, "persistent", 300.0),
    ("per-weak-uptake", _per(1, 1, lambda t: 1 + 0.5 * np.sin(t), lambda t: 0.45 + 0.2 * np.cos(t), 1.0),
     TWO_PI, "not-persistent", 900.0),
    ("per-fast-D", _per(3, 1, lambda t: 1.5 + np.cos(t), lambda t: 0.8 + 0.5 * np.sin(t), 0.5),
     TWO_PI, "persistent", 300.0),
]


def battery_history(model, x0=0.1):
    return History.constant(1.0, x0, model.tau)
