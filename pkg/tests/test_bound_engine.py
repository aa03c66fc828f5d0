import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from randsum.bound_engine import (BRANCHES, CumulantModel, bound_curve, chebyshev_bound, chi,
                                  chi_star, closed_form_geometric, closed_form_poisson,
                                  dominant_index, moment_growth_comparison, q_operator,
                                  random_sum_bound, stopping_exponents, w_operator)
from randsum.errors import DomainError
from randsum.index_laws import Deterministic, Geometric, ShiftedPoisson, TwoPoint
from randsum.tail_core import (GmrSpec, MlExponents, Normal, NormalTail, StepTail, TwoPointPM1,
                               ml_exponents)

NORMAL = CumulantModel.normal()
NT = NormalTail()


# ---------------------------------------------------------------- cumulants and chi

def test_normal_chi_is_scale_invariant():
    lam = np.array([0.0, 0.1, 1.0, 3.0, 10.0])
    assert np.allclose(chi(NORMAL, lam), lam ** 2 / 2, rtol=1e-14, atol=0)


def test_two_point_chi_matches_brute_force():
    model = CumulantModel.two_point()
    n = np.arange(1, 10 ** 6 + 1, dtype=float)
    for lam in (0.3, 1.0, 2.5, 6.0):
        t = lam / np.sqrt(n)
        brute = np.max(n * (t + np.log1p(np.exp(-2 * t)) - math.log(2)))
        # n log cosh(lam / sqrt n) increases to its limit lam^2 / 2
        oracle = max(brute, lam * lam / 2)
        assert chi(model, lam) == pytest.approx(oracle, abs=1e-10)


def test_chi_attained_at_finite_n_matches_brute_force():
    # heavy atom at 3: positive excess kurtosis, so n phi(lam / sqrt n) decreases in n
    step = StepTail([0, 0.5, 3.0], [1.0, 0.1, 0.0])
    model = CumulantModel.from_tail(step)
    n = np.arange(1, 10 ** 6 + 1, dtype=float)
    x, mass = np.array([0.5, 3.0]), np.array([0.9, 0.1])
    for lam in (0.5, 2.0):
        u = lam / np.sqrt(n)
        phi = np.log(np.sum(mass * np.cosh(u[:, None] * x), axis=1))
        brute = max(np.max(n * phi), 0.5 * step.second_moment * lam ** 2)
        assert chi(model, lam) == pytest.approx(brute, rel=1e-10)


def test_chi_zero_and_kramer_failure():
    assert chi(NORMAL, 0.0) == 0.0
    heavy = GmrSpec(0.5).cumulant()
    assert np.isinf(chi(heavy, 0.5))
    assert chi_star(heavy, 2.0) == 0.0


@pytest.mark.parametrize("model", [
    CumulantModel.normal(),
    CumulantModel.two_point(),
    CumulantModel.from_tail(StepTail([0, 0.5, 2.0], [1.0, 0.2, 0.0])),
])
def test_phi_small_lambda_is_quadratic(model):
    lam = 1e-3
    assert float(model.phi(lam)) == pytest.approx(model.variance * lam ** 2 / 2, rel=1e-4)


def test_quadrature_cumulant_laplace():
    # |xi| ~ Exp(1) symmetric: E exp(u xi) = 1 / (1 - u^2)
    model = GmrSpec(1.0).cumulant()
    for u in (0.2, 0.5, 0.9):
        assert float(model.phi(u)) == pytest.approx(-math.log1p(-u * u), rel=1e-7)
    assert np.isinf(model.phi(1.01))
    assert float(model.phi(1e-3)) == pytest.approx(model.variance * 1e-6 / 2, rel=1e-4)


def test_quadrature_cumulant_against_direct_integral():
    spec = GmrSpec(2.0, 0.0, C1=0.5)
    model = spec.cumulant()
    for u in (0.5, 1.0, 2.0):
        val, _ = integrate.quad(lambda y: math.cosh(u * y) * y * math.exp(-y * y / 2), 0, 60)
        assert float(model.phi(u)) == pytest.approx(math.log(val), rel=1e-8)


def test_quadrature_cumulant_thread_safe():
    model = GmrSpec(1.5, 0.5).cumulant()
    lams = np.linspace(0.1, 3.0, 16)
    serial = [float(model.phi(v)) for v in lams]
    fresh = GmrSpec(1.5, 0.5).cumulant()
    with ThreadPoolExecutor(4) as pool:
        parallel = list(pool.map(lambda v: float(fresh.phi(v)), lams))
    assert np.allclose(serial, parallel, rtol=1e-12)


def test_sample_model_recentres():
    x = np.random.default_rng(0).standard_normal(20000) + 5.0
    model = CumulantModel.from_samples(x)
    assert float(model.phi(0.0)) == 0.0
    assert float(model.phi(0.5)) == pytest.approx(0.125, rel=0.05)


# ---------------------------------------------------------------- chi*

def test_normal_legendre_on_dense_grid():
    x = np.linspace(0, 10, 101)
    assert np.allclose(chi_star(NORMAL, x), x * x / 2, atol=1e-6, rtol=0)


def test_legendre_gradient_equals_argmax():
    for x in (0.5, 1.5, 3.0):
        h = 1e-4
        grad = (chi_star(NORMAL, x + h) - chi_star(NORMAL, x - h)) / (2 * h)
        _, lam = chi_star(NORMAL, x, return_argmax=True)
        assert grad == pytest.approx(float(lam), abs=1e-3)


def test_two_point_legendre():
    x = np.array([0.5, 1.0, 2.0])
    assert np.allclose(chi_star(CumulantModel.two_point(), x), x * x / 2, atol=1e-6)


@given(xs=st.lists(st.floats(0, 20), min_size=2, max_size=8))
@settings(max_examples=25, deadline=None)
def test_chi_star_monotone(xs):
    xs = np.sort(np.asarray(xs))
    v = chi_star(CumulantModel.two_point(), xs)
    assert np.all(np.diff(v) >= -1e-9)
    assert chi_star(NORMAL, 0.0) == 0.0


def test_chi_star_rejects_negative():
    with pytest.raises(DomainError):
        chi_star(NORMAL, -1.0)


# ---------------------------------------------------------------- W and Q

def _brute_w(T, x, n=10 ** 4):
    z = np.geomspace(x * 1e-3, x * 10, n)
    f = np.exp(-x * x / (8 * z * z)) + T.truncated_second_moment(z)
    return min(1.0, 4 * f.min())


def test_w_operator_normal_brute_force():
    for x in (10.0, 15.0, 20.0):
        w = float(w_operator(NT, x))
        brute = _brute_w(NT, x)
        assert w <= brute + 1e-6
        assert w >= brute - 1e-6


def test_w_operator_gmr_brute_force():
    T = GmrSpec(1.0, 0.0).tail()
    for x in (20.0, 40.0):
        assert float(w_operator(T, x)) == pytest.approx(_brute_w(T, x), abs=1e-6)


def test_w_operator_step_tail_brute_force():
    T = StepTail([0, 0.5, 2.0, 5.0], [1.0, 0.3, 0.05, 0.0])
    for x in (3.0, 10.0, 30.0):
        # the infimum can sit exactly on a jump (right-continuous tail)
        z = np.sort(np.concatenate([np.geomspace(1e-4, 100, 200_001), T.x[1:]]))
        f = np.exp(-x * x / (8 * z * z)) + T.truncated_second_moment(z)
        assert float(w_operator(T, x)) == pytest.approx(min(1, 4 * f.min()), abs=1e-9)


def test_w_operator_edges():
    assert float(w_operator(NT, 0.0)) == 1.0
    x = np.linspace(0, 40, 81)
    w = w_operator(NT, x)
    assert np.all((w >= 0) & (w <= 1))
    assert np.all(np.diff(w) <= 1e-12)
    with pytest.raises(DomainError):
        w_operator(NT, -1.0)


def test_q_operator_normal_at_three():
    val, branch = q_operator(NT, NORMAL, 3.0)
    assert float(val) == pytest.approx(math.exp(-4.5), rel=1e-6)
    assert branch == "chi-star"


def test_q_operator_at_zero():
    val, branch = q_operator(NT, NORMAL, 0.0)
    assert float(val) == 1.0 and branch in BRANCHES


@pytest.mark.parametrize("summand", [Normal(1.0), TwoPointPM1(), GmrSpec(0.5), GmrSpec(3.0)])
def test_branch_soundness(summand):
    T, model = summand.tail(), summand.cumulant()
    x = np.linspace(0, 12, 49)
    q, _ = q_operator(T, model, x)
    assert np.all(q <= w_operator(T, x) + 1e-15)
    assert np.all(q <= np.exp(-chi_star(model, x)) + 1e-15)
    assert np.all(q <= chebyshev_bound(x, T.second_moment) + 1e-15)


def test_heavy_tail_falls_back_to_w():
    T = GmrSpec(0.5).tail()
    _, branch = q_operator(T, GmrSpec(0.5).cumulant(), np.array([20.0, 60.0]))
    assert set(branch) <= {"W", "chebyshev"}


# ---------------------------------------------------------------- random-index bound

def test_deterministic_reduces_to_q():
    x = np.linspace(0, 6, 25)
    for n in (2, 5):
        b = random_sum_bound(NT, NORMAL, Deterministic(n), x, chebyshev_cap=False)
        q, _ = q_operator(NT, NORMAL, x)
        assert np.allclose(b, q, rtol=1e-14, atol=0)


def test_geometric_long_sum_oracle():
    law = Geometric(4.0)
    n = np.arange(1, 10 ** 4 + 1)
    y = 3.0 * np.sqrt(4.0 / n)
    q_per_n, _ = q_operator(NT, NORMAL, y)
    brute = float(np.sum(law.pmf(n) * q_per_n))
    got = float(random_sum_bound(NT, NORMAL, law, 3.0, chebyshev_cap=False))
    assert got == pytest.approx(brute, abs=1e-10)


def test_bound_at_zero_and_cap():
    x = np.linspace(0, 6, 25)
    b = random_sum_bound(NT, NORMAL, Geometric(2.0), x)
    assert b[0] == 1.0
    assert np.all(b <= chebyshev_bound(x) + 1e-15)


def test_certified_truncation():
    x = np.arange(0, 6.01, 0.25)
    for A in (2.0, 4.0, 16.0):
        a = random_sum_bound(NT, NORMAL, Geometric(A), x, eps_tail=1e-12)
        b = random_sum_bound(NT, NORMAL, Geometric(A), x, eps_tail=1e-15)
        assert np.max(np.abs(a - b)) < 1e-11
        assert np.all(a >= b)


def test_gaussian_oracle_chain():
    x = np.linspace(0, 6, 49)
    for n in (2, 3, 10):
        b = bound_curve(Normal(1.0), Deterministic(n), x).values
        assert np.all(b >= stats.norm.sf(x))


def test_bound_curve_monotone_and_schema(tmp_path):
    x = np.arange(0, 6.01, 0.25)
    curve = bound_curve(TwoPointPM1(), ShiftedPoisson(5.0), x)
    assert np.all(np.diff(curve.values) <= 0)
    assert set(curve.branch) <= set(BRANCHES)
    text = curve.to_csv(tmp_path / "b.csv", header_lines=["seed: 0"])
    lines = text.splitlines()
    assert lines[0] == "# seed: 0"
    assert lines[1] == "x,bound,branch,dominant_n"
    assert len(lines) == 2 + x.size


def test_sup_over_A_attained():
    x = np.linspace(0.5, 6, 12)
    curves = np.array([random_sum_bound(NT, NORMAL, Geometric(A), x) for A in (2, 4, 8, 16)])
    sup = curves.max(axis=0)
    assert np.all(np.isfinite(sup)) and np.all(sup <= 1)


def test_two_point_law_bound_dominates_exact():
    from randsum.lower_bounds import exact_two_point_tail
    for xv in (3.0, 4.0, 6.0):
        law = TwoPoint(1.0 / math.floor(xv * xv))
        b = float(random_sum_bound(NT, NORMAL, law, xv))
        assert exact_two_point_tail(xv).exact <= b


@pytest.mark.parametrize("summand", [Normal(1.0), GmrSpec(1.0), GmrSpec(0.5)])
def test_geometric_bound_decay_rate(summand):
    ml = summand.exponents
    x = np.geomspace(8, 40, 6)
    b = random_sum_bound(summand.tail(), summand.cumulant(), Geometric(4.0), x,
                         eps_tail=1e-40, chebyshev_cap=False)
    assert np.all(b > 1e-39)  # remainder mass does not flatten the curve
    slope = np.polyfit(np.log(x), np.log(-np.log(b)), 1)[0]
    assert slope >= ml.x_power - 0.1


# ---------------------------------------------------------------- dominant index

def _brute_dominant(law, ml, x, C=1.0, C2=math.e, n_max=10 ** 6):
    n = np.arange(1, n_max + 1)
    y = x * np.sqrt(law.mean / n)
    terms = law.logpmf(n) - C * y ** ml.M * np.log(C2 + y) ** ml.L
    return int(n[np.argmax(terms)])


@pytest.mark.parametrize("A", [2.0, 8.0])
@pytest.mark.parametrize("x", [4.0, 16.0, 64.0])
@pytest.mark.parametrize("ml", [MlExponents(2.0, 0.0), MlExponents(1.0, 1.0)])
def test_dominant_index_exhaustive(A, x, ml):
    for law in (Geometric(A), ShiftedPoisson(A)):
        assert dominant_index(law, ml, x) == _brute_dominant(law, ml, x)


@pytest.mark.parametrize("ml", [MlExponents(2.0, 0.0), MlExponents(1.0, 0.0)])
def test_dominant_index_scaling(ml):
    law = Geometric(4.0)
    ratio = dominant_index(law, ml, 1e4) / dominant_index(law, ml, 1e3)
    assert ratio == pytest.approx(10 ** ml.x_power, rel=0.25)


def test_dominant_index_tie_goes_to_smaller_n():
    # Poisson(2) puts equal mass on 1 and 2, i.e. eta = 2 and eta = 3; C = 0 keeps only log q_n
    law = ShiftedPoisson(3.0)
    assert law.logpmf(2) == law.logpmf(3)
    assert dominant_index(law, MlExponents(2.0, 0.0), 4.0, C=0.0) == 2


def test_dominant_index_rejects_other_laws():
    with pytest.raises(DomainError):
        dominant_index(Deterministic(3), MlExponents(2.0, 0.0), 4.0)


# ---------------------------------------------------------------- closed forms

def test_closed_form_examples():
    ml = MlExponents(2.0, 0.0)
    assert float(closed_form_geometric(ml, 2.0, C=0.5)) == pytest.approx(math.exp(-1.0))
    assert float(closed_form_poisson(ml, 2.0)) == pytest.approx(math.exp(-2 * math.sqrt(math.log(2))))
    assert ml_exponents(math.inf, 0.0).poisson_log_power == 0.5
    with pytest.raises(DomainError):
        closed_form_geometric(ml, 1.5)


@given(M=st.floats(0.1, 2.0), L=st.floats(-2, 2), C=st.floats(0.1, 5),
       x=st.floats(math.e + 1e-3, 1e3))
def test_poisson_beats_geometric(M, L, C, x):
    ml = MlExponents(M, L)
    g = float(closed_form_geometric(ml, x, C=C, Ccap=1e-3))
    p = float(closed_form_poisson(ml, x, C=C, Ccap=1e-3))
    assert p < g or g == 0.0


# ---------------------------------------------------------------- stopping exponents

def test_stopping_exponents_example():
    e = stopping_exponents(2, 0, 2, 0)
    assert e.q == pytest.approx(4 / 7, abs=1e-15)
    assert e.w == pytest.approx(4 / 7, abs=1e-15)


@given(a=st.floats(1e-3, 1e3), m=st.floats(1e-3, 1e3), b=st.floats(-3, 3), r=st.floats(-3, 3))
def test_stopping_exponent_identity(a, m, b, r):
    e = stopping_exponents(a, b, m, r)
    assert abs(1 / e.q - (1 + 1 / (2 * a) + 1 / m)) <= 1e-12 * (1 / e.q)
    assert 0 < e.q < 1


def test_stopping_exponent_limits_and_curve():
    e = stopping_exponents(1.0, 0.0, math.inf, 0.0)
    assert e.q == pytest.approx(2 / 3)
    p = np.array([2.0, 4.0, 8.0])
    assert np.allclose(e.moment_curve(p), p ** 1.5 * np.log(p) ** (-e.w / e.q))
    with pytest.raises(DomainError):
        stopping_exponents(0.0, 0.0, 2.0, 0.0)


def test_moment_growth_comparison():
    p = np.array([3.0, 10.0, 100.0])
    c = moment_growth_comparison(math.inf, p)
    assert np.allclose(c["ours"], p / np.sqrt(np.log(p)))
    c2 = moment_growth_comparison(2.0, np.array([100.0]))
    assert c2["ours"][0] < c2["gine"][0] and c2["ours"][0] < c2["gut"][0]
    grid = np.linspace(3, 200, 50)
    for m in (1.5, 2.0, 5.0, math.inf):
        for curve in ("ours", "gine", "gut"):
            assert np.all(np.diff(moment_growth_comparison(m, grid)[curve]) > 0)
    with pytest.raises(DomainError):
        moment_growth_comparison(1.0, p)
