"""Risk-sensitive multi-armed bandits with known payoff distributions.

The large-horizon value of a two-attribute utility ``u(x, y)`` (average
payoff, scaled cumulative deviation) is computed three ways: as the solution
of a nonlinear HJB equation, by Monte Carlo simulation of strategies, and
exactly by backward induction on small instances.
"""

__version__ = "0.1.0"

from .arms import (Arm, ArmSet, Thresholds, compute_bounds, extreme_points, g_driver, make_arms,
                   rectangle_arms, threshold_values, thresholds)
from .distributions import (Constant, DiscreteFinite, Normal, PayoffDistribution, TwoPoint, Uniform,
                            distribution_from_spec)
from .dp import exact_value_dp
from .exceptions import (BanditError, ConfigError, InvalidInputError, NumericalError, PolicyError,
                         ResourceError)
from .hjb import (BoundaryPolicy, Grid, PdeSolution, SolverConfig, extreme_reduction_check,
                  feynman_kac_value, perturbed_driver, solve_hjb)
from .obm import (ObmParams, obm_cdf, obm_density, shortfall_switch_bound, simulate_obm,
                  switch_value_semivariance)
from .simulate import MonteCarloEstimate, SimulationConfig, estimate_Un, run_strategy, sample_payoff
from .strategies import Alternate, Custom, LambdaFraction, SignSwitch, Specialize, lambda_for_target
from .utility import (TrajectoryStatistics, UtilityIndex, UtilityKind, eval_index, finite_horizon_utility,
                      single_arm_limit, specialization_certificate)

__all__ = [name for name in dir() if not name.startswith("_")]
