"""A periodic chemostat where the averaged exponential test says "persist" yet the species dies.

Uptake p(z) = pi on the washout orbit, D(t) = 1 - sin t, tau = pi/2.  The
weight phi solving phi = exp(-pi tau phi) makes the sharp margin negative, while
the cruder window test with the factor exp(-int D) passes on every window.
"""

import math

from chemostat_delay import (History, check_necessary_exp, check_periodic, classify_trajectory,
                             integrate, periodic_washout)
from chemostat_delay.cli import counterexample_integral, counterexample_model

w = 2 * math.pi
m = counterexample_model()

print(f"int_0^(2 pi) p(z) exp(-int_(t-tau)^t D) dt = {counterexample_integral():.9f}  (> 2 pi)")

sharp = check_periodic(m, w)
print(f"sharp periodic margin: {sharp.margin:+.5f} -> {sharp.verdict}")
print(f"mean of p(z) phi = {sharp.averages['pzphi']:.5f} < mean D = {sharp.averages['D']:.1f}, "
      f"phi in [{sharp.witnesses['phi_min']:.6f}, {sharp.witnesses['phi_max']:.6f}]")

z = periodic_washout(m, w)
nec = check_necessary_exp(m, z, 1 / 200, 300 * math.pi, 1200 * math.pi)
print(f"exponential window test: {nec.verdict}, worst margin {nec.margin:+.4f} "
      f"over {nec.scan.count} windows")

traj = integrate(m, History.constant(1.0, 0.01, m.tau), 40 * math.pi, m.tau / 100)
print(f"simulation: x(40 pi) = {traj.x[-1]:.3e} -> {classify_trajectory(traj)}")
