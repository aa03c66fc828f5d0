import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from randsum.errors import DomainError
from randsum.index_laws import (Deterministic, Explicit, Geometric, ShiftedPoisson, TwoPoint,
                                law_from_dict)


@given(A=st.floats(2, 200), eps=st.sampled_from([1e-6, 1e-12, 1e-15]))
def test_geometric_truncation_point_is_minimal(A, eps):
    law = Geometric(A)
    n = law.truncation_point(eps)
    assert law.sf(n) < eps
    assert n == 1 or law.sf(n - 1) >= eps


def test_geometric_pmf_matches_scipy():
    law = Geometric(4.0)
    n = np.arange(1, 50)
    assert np.allclose(law.pmf(n), stats.geom.pmf(n, 0.25), rtol=1e-13)
    _, q, rem = law.series(1e-12)
    assert abs(q.sum() + rem - 1) < 1e-13


def test_shifted_poisson():
    law = ShiftedPoisson(5.0)
    n = np.arange(1, 60)
    assert np.allclose(law.pmf(n), stats.poisson.pmf(n - 1, 4.0), rtol=1e-12)
    n, q, rem = law.series(1e-15)
    assert rem < 1e-15
    assert np.sum(n * q) == pytest.approx(5.0, rel=1e-12)


def test_means_below_two_rejected():
    for build in (lambda: Geometric(1.5), lambda: ShiftedPoisson(1.9),
                  lambda: Deterministic(1), lambda: Explicit([1.0])):
        with pytest.raises(DomainError):
            build()


def test_explicit_validation():
    with pytest.raises(DomainError):
        Explicit([0.2, 0.3])
    with pytest.raises(DomainError):
        Explicit([-0.1, 1.1])
    law = Explicit([0.0, 0.5, 0.5])
    assert law.mean == 2.5 and law.truncation_point(1e-12) == 3
    assert law.sf(2) == pytest.approx(0.5)


@given(k=st.integers(3, 400))
def test_two_point_mean(k):
    law = TwoPoint(1.0 / k)
    a = 1.0 / k
    assert law.mean == pytest.approx(3 - 2 * a, rel=1e-12)
    assert law.pmf(2) == pytest.approx(1 - a)
    assert law.pmf(k) == pytest.approx(a)


def test_two_point_rejects_non_integer():
    with pytest.raises(DomainError):
        TwoPoint(0.3)
    with pytest.raises(DomainError):
        TwoPoint(0.5)


def test_round_trip_dicts():
    for law in (Geometric(3.0), ShiftedPoisson(7.5), Deterministic(4), TwoPoint(1 / 9),
                Explicit([0.25, 0.25, 0.5])):
        assert law_from_dict(law.to_dict()) == law
    with pytest.raises(DomainError):
        law_from_dict({"kind": "zeta"})


def test_sampling_means():
    rng = np.random.default_rng(0)
    for law in (Geometric(4.0), ShiftedPoisson(6.0), TwoPoint(1 / 9)):
        x = law.sample(rng, 200_000)
        assert x.min() >= 1
        assert x.mean() == pytest.approx(law.mean, rel=0.02)
