"""Exponential tail bounds for normed sums with a random number of summands."""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, InfeasibleError, NumericalError, RandsumError
from .tail_core import (GmrSpec, GmrTail, MlExponents, Normal, NormalTail, StepTail,
                        TailFunction, TwoPointPM1, gmr_tail, ml_exponents, orlicz_norm_estimate,
                        sample_gmr_symmetric, second_moment_tail)
from .index_laws import Deterministic, Explicit, Geometric, ShiftedPoisson, TwoPoint
from .bound_engine import (BoundCurve, CumulantModel, StoppingExponents, bound_curve, chi,
                           chi_star, closed_form_geometric, closed_form_poisson, dominant_index,
                           moment_growth_comparison, q_operator, random_sum_bound,
                           stopping_exponents, w_operator)
from .mc_verifier import (CompoundSpec, EmpiricalTail, FirstPassage, FixedWindowMax,
                          Independent, empirical_moments, simulate_normalized_sum_tail,
                          simulate_tail, stopping_time_experiment)
from .lower_bounds import (TwoPointConstruction, exact_two_point_tail, geometric_lower_bound_mc,
                           poisson_lower_overlay)
