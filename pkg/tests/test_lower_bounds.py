import math

import numpy as np
import pytest
from scipy import integrate

from randsum.errors import DomainError, InfeasibleError
from randsum.index_laws import TwoPoint
from randsum.lower_bounds import (FLOOR_ARG, TwoPointConstruction, exact_two_point_tail,
                                  floor_constant, geometric_lower_bound_mc,
                                  poisson_lower_overlay, tail_exponent_slope,
                                  two_point_ratio_table)
from randsum.tail_core import GmrSpec, TwoPointPM1, ml_exponents


def psi_quad(t):
    """Standard normal upper tail by direct quadrature of the density."""
    val, _ = integrate.quad(lambda s: math.exp(-s * s / 2), t, math.inf, epsabs=0, epsrel=1e-13)
    return val / math.sqrt(2 * math.pi)


def test_construction_parameters():
    c = TwoPointConstruction(3.0)
    assert c.K == 9 and c.alpha == pytest.approx(1 / 9)
    assert c.A == pytest.approx(25 / 9)
    assert c.law.mean == pytest.approx(25 / 9)
    for x in np.arange(3, 20, 0.37):
        assert TwoPointConstruction(x).A >= 25 / 9 - 1e-15
    with pytest.raises(DomainError):
        TwoPointConstruction(2.9)


def test_exact_tail_at_three():
    t = exact_two_point_tail(3.0)
    assert t.single_term == pytest.approx(psi_quad(5 / 3) / 9, rel=1e-10)
    assert t.single_term == pytest.approx(0.00531, abs=5e-6)
    full = (8 / 9) * psi_quad(3 * math.sqrt(25 / 18)) + psi_quad(5 / 3) / 9
    assert t.exact == pytest.approx(full, rel=1e-10)


def test_floor_constant_from_quadrature():
    assert FLOOR_ARG == pytest.approx(1.837, abs=1e-3)
    assert floor_constant() == pytest.approx(psi_quad(3 * math.sqrt(3 / 8)), rel=1e-10)
    assert floor_constant() == pytest.approx(0.0331, abs=1e-4)
    assert exact_two_point_tail(3.0).floor == pytest.approx(floor_constant() / 9)


def test_exact_dominates_single_term_and_ratio_floor():
    x = np.arange(3, 50.01, 0.5)
    for v in x:
        t = exact_two_point_tail(v)
        assert t.exact >= t.single_term
    table = two_point_ratio_table(x)
    assert np.all(table["holds"])


def test_geometric_lower_mc_consistency():
    spec = GmrSpec(2.0)
    x = np.array([2.0, 3.0, 4.0])
    tail = geometric_lower_bound_mc(spec, 4.0, x, 100_000, seed=1)
    ml = ml_exponents(2.0, 0.0)
    assert np.all(tail.ci_low > 0)
    assert set(tail.overlays) == {"lower", "upper"}
    cols = tail.to_table().columns
    assert list(cols)[:6] == ["x", "estimate", "ci_low", "ci_high", "hits", "N"]
    assert tail.meta["x_power"] == ml.x_power


def test_geometric_lower_mc_infeasible():
    with pytest.raises(InfeasibleError) as exc:
        geometric_lower_bound_mc(GmrSpec(2.0), 4.0, [2.0, 9.0], 10_000, seed=1)
    assert exc.value.feasible is not None
    tail = geometric_lower_bound_mc(GmrSpec(2.0), 4.0, [2.0, 9.0], 10_000, seed=1,
                                    drop_infeasible=True)
    assert tail.x.tolist() == [2.0] and tail.meta["dropped_x"] == [9.0]


def test_geometric_lower_requires_m_above_one():
    with pytest.raises(DomainError):
        geometric_lower_bound_mc(GmrSpec(1.0), 4.0, [2.0], 10_000)
    with pytest.raises(DomainError):
        geometric_lower_bound_mc(GmrSpec(2.0), 4.0, [1.0], 10_000)


def test_poisson_overlay():
    spec = GmrSpec(3.0)
    x = np.array([math.e, 10.0, 30.0, 100.0])
    t = poisson_lower_overlay(spec, x, C8=1.0, C9=2.0, C=0.5, Ccap=1.0)
    assert t["upper"][0] == pytest.approx(math.exp(-0.5 * math.e ** 1.0))
    ratio = np.log(t["lower"][1:]) / np.log(t["upper"][1:])
    assert np.allclose(ratio, 4.0)
    bounded = poisson_lower_overlay(TwoPointPM1(), x)
    assert bounded.meta["log_power"] == 0.5
