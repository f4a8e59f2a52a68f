"""Constant inputs: where the washout threshold sits and what a simulation does on either side.

With Monod uptake p(s) = s/(1+s), s0 = 1 and tau = 1 the species persists
exactly when p(s0) exp(-D tau) > D, i.e. below D* = W(1/2).
"""

import numpy as np
from scipy.optimize import brentq
from scipy.special import lambertw

from chemostat_delay import (ChemostatModel, History, TimeFunction, UptakeFunction,
                             check_constant, classify_trajectory, integrate)


def model(D):
    return ChemostatModel(UptakeFunction.monod(1.0, 1.0), TimeFunction.constant(1.0),
                          TimeFunction.constant(D), 1.0)


D_star = brentq(lambda D: check_constant(model(D)).margin, 0.05, 0.9, xtol=1e-15)
print(f"threshold from margin root: {D_star:.15f}")
print(f"Lambert W(1/2):             {lambertw(0.5).real:.15f}")

for D in D_star * np.array([0.8, 0.95, 1.05, 1.2]):
    m = model(D)
    rep = check_constant(m)
    traj = integrate(m, History.constant(1.0, 0.1, 1.0), 800.0, 0.01)
    print(f"D = {D:.4f}  margin = {rep.margin:+.4f}  criterion: {rep.verdict:<15} "
          f"simulation: {classify_trajectory(traj):<15} x(800) = {traj.x[-1]:.3e}")
