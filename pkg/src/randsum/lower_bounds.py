"""Lower-bound constructions showing the upper bounds cannot be improved."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._numerics import normal_sf
from .bound_engine import closed_form_geometric, closed_form_poisson
from .errors import DomainError
from .index_laws import Geometric, TwoPoint
from .mc_verifier import CompoundSpec, loglog_slope, simulate_tail
from .reporting import Table
from .tail_core import ml_exponents

#: ``3 sqrt(3/8)``: the argument of the normal tail in the two-point floor
FLOOR_ARG = 3.0 * math.sqrt(3.0 / 8.0)


def floor_constant():
    """``Psi(3 sqrt(3/8))``, computed from the normal tail (about 0.0331)."""
    return float(normal_sf(FLOOR_ARG))


@dataclass(frozen=True)
class TwoPointConstruction:
    """Index with ``P(eta = 2) = 1 - alpha`` and ``P(eta = floor(x^2)) = alpha``."""

    x: float

    def __post_init__(self):
        if not self.x >= 3:
            raise DomainError("the two-point construction needs x >= 3")

    @property
    def K(self):
        return int(math.floor(self.x * self.x))

    @property
    def alpha(self):
        return 1.0 / self.K

    @property
    def A(self):
        return 3.0 - 2.0 * self.alpha

    @property
    def law(self):
        return TwoPoint(self.alpha)

    def spec(self):
        from .tail_core import Normal
        return CompoundSpec(Normal(1.0), self.law)


@dataclass(frozen=True)
class TwoPointTail:
    exact: float
    single_term: float
    floor: float


def exact_two_point_tail(x):
    """Exact ``P(S > x)`` for the construction with standard normal summands.

    Given ``eta = k`` the normed sum is ``N(0, k/A)``, so the tail is a
    two-term normal mixture.  ``floor`` is ``x^-2 Psi(3 sqrt(3/8))``.
    """
    c = TwoPointConstruction(float(x))
    a, A = c.alpha, c.A
    single = a * float(normal_sf(x * math.sqrt(A * a)))
    exact = (1.0 - a) * float(normal_sf(x * math.sqrt(A / 2.0))) + single
    return TwoPointTail(exact, single, floor_constant() / (x * x))


def two_point_ratio_table(x_grid):
    """``x^2 P(S > x)`` against the floor constant on a grid of x >= 3."""
    x = np.asarray(x_grid, dtype=float)
    vals = [exact_two_point_tail(v) for v in x]
    exact = np.array([v.exact for v in vals])
    c = floor_constant()
    return Table({"x": x, "exact_tail": exact, "ratio": x * x * exact,
                  "floor_constant": np.full(x.size, c),
                  "holds": x * x * exact >= c},
                 {"floor_arg": FLOOR_ARG, "floor_constant": c})


def _check_lower_spec(spec):
    if not spec.m > 1:
        raise DomainError("lower bounds need summands with m > 1")
    return ml_exponents(spec.m, spec.r)


def geometric_lower_bound_mc(spec, A, x_grid, N, seed=0, C6=1.0, C7=1.0, C=1.0, Ccap=1.0,
                             min_hits=100, drop_infeasible=False, confidence=0.99, workers=1):
    """Empirical tail of compound geometric sums with lower and upper closed-form overlays.

    Overlays ``lower`` (``C6 exp(-C7 x^{2M/(M+2)} log^{2L/(M+2)} x)``) and
    ``upper`` (the same shape with ``Ccap``, ``C``) are attached as extra
    columns.  Grid points with fewer than ``min_hits`` hits raise
    :class:`InfeasibleError` unless ``drop_infeasible`` is set.
    """
    ml = _check_lower_spec(spec)
    x = np.asarray(x_grid, dtype=float)
    if np.any(x < 2):
        raise DomainError("x must be >= 2")
    cspec = CompoundSpec(spec, Geometric(float(A)))
    tail = simulate_tail(cspec, x, N, seed, confidence=confidence, workers=workers)
    tail.overlays = {
        "lower": closed_form_geometric(ml, x, C=C7, Ccap=C6),
        "upper": closed_form_geometric(ml, x, C=C, Ccap=Ccap),
    }
    tail.meta.update({"constants": {"C6": C6, "C7": C7, "C": C, "Ccap": Ccap},
                      "M": ml.M, "L": ml.L, "x_power": ml.x_power, "min_hits": min_hits})
    ok = tail.feasible(min_hits)
    if drop_infeasible:
        tail.meta["dropped_x"] = x[~ok].tolist()
        tail = tail.restrict(ok)
    else:
        tail.require_feasible(min_hits)
    return tail


def tail_exponent_slope(tail, x_min=2.0, min_hits=100):
    """Slope of ``log(-log T_hat)`` against ``log x`` on the feasible part of ``tail``."""
    return loglog_slope(tail.x, tail.estimate, tail.hits, x_min=x_min, min_hits=min_hits)


def poisson_lower_overlay(spec, x_grid, C8=1.0, C9=1.0, C=1.0, Ccap=1.0):
    """Closed-form Poisson lower curve next to the matching upper curve (x >= 2)."""
    ml = ml_exponents(spec.m, spec.r)
    x = np.asarray(x_grid, dtype=float)
    lower = closed_form_poisson(ml, x, C=C9, Ccap=C8)
    upper = closed_form_poisson(ml, x, C=C, Ccap=Ccap)
    return Table({"x": x, "lower": lower, "upper": upper},
                 {"M": ml.M, "L": ml.L, "x_power": ml.x_power, "log_power": ml.poisson_log_power,
                  "constants": {"C8": C8, "C9": C9, "C": C, "Ccap": Ccap}})
