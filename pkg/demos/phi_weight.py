"""The delay weight phi in three settings: closed form, transient relaxation, periodic orbit."""

import math

import numpy as np
from scipy.special import lambertw

from chemostat_delay import (ChemostatModel, TimeFunction, UptakeFunction, periodic_washout,
                             phi_constant, phi_periodic, phi_transient)

P, tau = math.pi, math.pi / 2
print(f"phi* = {phi_constant(P, tau):.16f}")
print(f"W(P tau)/(P tau) = {lambertw(P * tau).real / (P * tau):.16f}")

m = ChemostatModel(UptakeFunction.monod(2 * math.pi, 1.0), TimeFunction.constant(1.0),
                   TimeFunction.constant(1.0), tau)
phi, _, _ = phi_transient(m, t_end=60.0, h=math.pi / 200)
for t in (0.0, 5.0, 20.0, 60.0):
    print(f"  transient phi({t:4.1f}) = {phi(t):.8f}")

w = 2 * math.pi
pm = ChemostatModel(UptakeFunction.monod(2.0, 1.0),
                    TimeFunction.sampled(lambda t: 2 + 0.5 * np.sin(t), w),
                    TimeFunction.sampled(lambda t: 0.5 + 0.25 * np.cos(t), w), 1.0)
z = periodic_washout(pm, w)
ph = phi_periodic(pm, z, w)
print(f"periodic phi: min {ph.phi.min():.6f}  max {ph.phi.max():.6f}  residual {ph.residual:.2e}")
