"""Persistence of a single-species chemostat with delayed growth and time-varying inputs."""

from .criteria import (INCONCLUSIVE, NOT_PERSISTENT, PERSISTENT, CriterionReport,
                       check_constant, check_necessary_exp, check_periodic, check_transient,
                       check_window, classify_trajectory, search_eta_T)
from .dde import (Trajectory, compute_psi, compute_y, conservation_defect, integrate,
                  log_growth_identity)
from ._steps import divisor_step
from .errors import *  # noqa: F401,F403
from .model import ChemostatModel, History, UptakeFunction, is_non_null
from .timefn import TimeFunction, average, integrate as integrate_fn, simpson
from .washout import (c_solution, periodic_washout, phi_constant, phi_from_c, phi_periodic,
                      phi_transient, washout_solution)

__version__ = "0.1.0"
