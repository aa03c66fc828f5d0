"""Tail functions, G(m, r) Orlicz machinery and summand samplers.

A *tail function* here is ``T(x) = P(|xi| > x)`` for ``x >= 0``.  It dominates the
two-sided tail ``max(P(xi >= x), P(xi <= -x))`` and is what the truncation
operator and the Chebyshev bounds consume.
"""
from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NumericalError

INF = math.inf
SAMPLER_TAIL_TOL = 1e-10
DEFAULT_P_GRID = (2, 3, 4, 6, 8, 12, 16, 24, 32)


# --------------------------------------------------------------------------
# (m, r) -> (M, L)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MlExponents:
    M: float
    L: float

    @property
    def x_power(self):
        """Power of x in the geometric/Poisson closed forms, 2M/(M+2)."""
        return 2.0 * self.M / (self.M + 2.0)

    @property
    def geometric_log_power(self):
        return 2.0 * self.L / (self.M + 2.0)

    @property
    def poisson_log_power(self):
        return (2.0 * self.L + self.M) / (self.M + 2.0)


def ml_exponents(m, r):
    """Exponents (M, L) of the uniform tail of normalised sums of G(m, r) summands.

    Branches not listed raise :class:`DomainError`; in particular m in (1, 2)
    with r >= 0 and m = 2 with r < 0 are left undefined.
    """
    m = float(m)
    r = float(r)
    if math.isnan(m) or math.isnan(r) or m <= 0:
        raise DomainError(f"m must be positive, got m={m}")
    if math.isinf(m):
        return MlExponents(2.0, 0.0)
    if m < 1 or (m == 1 and r < 0):
        return MlExponents(2 * m / (m + 2), 2 * r / (m + 2))
    if (m == 1 and r >= 0) or (1 < m < 2 and r < 0):
        return MlExponents(m, r)
    if (m == 2 and r >= 0) or m > 2:
        return MlExponents(2.0, 0.0)
    raise DomainError(f"(m, r) = ({m}, {r}) is not covered by the exponent table")


# --------------------------------------------------------------------------
# tail functions
# --------------------------------------------------------------------------

class TailFunction:
    """Base class: ``T(x) = P(|xi| > x)``, non-increasing, ``T(0) = 1``.

    Subclasses implement :meth:`log_tail` (vectorised).  The truncated second
    moment defaults to adaptive quadrature and may be overridden with an exact
    formula.
    """

    #: points where quadrature should split (kinks, jumps)
    breakpoints = ()

    def log_tail(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return np.exp(self.log_tail(x))

    @functools.cached_property
    def second_moment(self):
        return float(second_moment_tail(self, 0.0))

    def truncated_second_moment(self, z):
        """Vectorised ``E[xi^2 1{|xi| > z}]``."""
        z = np.asarray(z, dtype=float)
        out = np.vectorize(lambda zz: second_moment_tail(self, zz), otypes=[float])(z)
        return out

    def abs_moment(self, p):
        """``E|xi|^p`` via ``int p y^(p-1) T(y) dy``."""
        val, err = _integrate_tail(lambda y: p * y ** (p - 1) * self(y), 0.0, self.breakpoints)
        return val


def _integrate_tail(func, z, breakpoints=(), epsrel=1e-11):
    """Integrate ``func`` over ``[z, inf)`` by adaptive quadrature, splitting at breakpoints."""
    pts = sorted(b for b in breakpoints if b > z)
    edges = [z] + pts
    total = 0.0
    err = 0.0
    for lo, hi in zip(edges, edges[1:] + [INF]):
        val, e, info = integrate.quad(func, lo, hi, epsabs=1e-14, epsrel=epsrel, limit=400,
                                      full_output=1)[:3]
        if not np.isfinite(val):
            raise NumericalError("tail quadrature returned a non-finite value",
                                 {"interval": (lo, hi), "value": val})
        total += val
        err += e
    if err > 1e-6 * max(abs(total), 1e-12) + 1e-12:
        raise NumericalError("tail quadrature did not converge",
                             {"value": total, "abserr": err, "z": z})
    return total, err


def second_moment_tail(T, z):
    """Truncated second moment ``-int_z^inf y^2 dT(y) = E[xi^2 1{|xi| > z}]``.

    Step tails use their jump masses exactly; continuous tails are integrated by
    parts, ``z^2 T(z) + 2 int_z^inf y T(y) dy``, with adaptive quadrature.
    """
    z = float(z)
    if z < 0:
        raise DomainError("truncation level must be non-negative")
    if isinstance(T, StepTail):
        return T._step_second_moment(z)
    if np.isinf(z):
        return 0.0
    head = z * z * float(T(z)) if z > 0 else 0.0
    body, _ = _integrate_tail(lambda y: 2.0 * y * float(T(y)), z, T.breakpoints)
    return head + body


class NormalTail(TailFunction):
    """Absolute-value tail of N(0, sigma^2): ``erfc(x / (sigma sqrt 2))``."""

    def __init__(self, sigma=1.0):
        if sigma <= 0:
            raise DomainError("sigma must be positive")
        self.sigma = float(sigma)

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        return special.log_ndtr(-x / self.sigma) + math.log(2.0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return special.erfc(x / (self.sigma * math.sqrt(2.0)))

    def truncated_second_moment(self, z):
        # 2 sigma^2 (t phi(t) + Psi(t)), t = z / sigma
        t = np.asarray(z, dtype=float) / self.sigma
        pdf = np.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)
        with np.errstate(invalid="ignore"):
            val = 2.0 * self.sigma ** 2 * (np.where(np.isinf(t), 0.0, t * pdf) + special.ndtr(-t))
        return val

    def __repr__(self):
        return f"NormalTail(sigma={self.sigma})"


class StepTail(TailFunction):
    """Right-continuous step tail from a grid of ``(x_k, T(x_k))`` pairs.

    ``T(x) = T_k`` on ``[x_k, x_{k+1})``; the law of ``|xi|`` puts mass
    ``T_{k-1} - T_k`` at ``x_k``.  The grid must start at ``(0, 1)`` and end
    with ``T = 0`` so the second moment is finite.
    """

    def __init__(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        if x.ndim != 1 or x.shape != t.shape or x.size < 2:
            raise DomainError("step tail needs two equal-length 1-d arrays with >= 2 points")
        if np.any(np.diff(x) <= 0):
            raise DomainError("step tail x values must be strictly increasing")
        if x[0] != 0.0 or t[0] != 1.0:
            raise DomainError("step tail must start at (0, 1)")
        if np.any(np.diff(t) > 0) or np.any(t < 0):
            raise DomainError("step tail values must be non-increasing and non-negative")
        if t[-1] != 0.0:
            raise DomainError("step tail must reach 0 inside the grid")
        self.x = x
        self.t = t
        self.mass = np.concatenate([[0.0], -np.diff(t)])
        sq = self.x ** 2 * self.mass
        # m2_above[k] = sum_{j > k} x_j^2 mass_j
        self._m2_above = np.concatenate([np.cumsum(sq[::-1])[::-1][1:], [0.0]])
        self.breakpoints = tuple(x[1:])

    @classmethod
    def from_samples(cls, samples):
        a = np.sort(np.abs(np.asarray(samples, dtype=float)))
        vals, counts = np.unique(a, return_counts=True)
        n = a.size
        tail = 1.0 - np.cumsum(counts) / n
        tail[-1] = 0.0
        pos = vals > 0
        # an atom at zero is lumped into the first positive point (keeps T(0) = 1, conservative)
        return cls(np.concatenate([[0.0], vals[pos]]), np.concatenate([[1.0], tail[pos]]))

    @classmethod
    def from_csv(cls, path):
        """Load a two-column ``x, T`` CSV (header optional)."""
        xs, ts = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    xs.append(float(row[0]))
                    ts.append(float(row[1]))
                except ValueError:
                    if xs:
                        raise DomainError(f"non-numeric row in {path}: {row}")
                    continue  # header
        return cls(xs, ts)

    def log_tail(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self(x))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self.x, x, side="right") - 1
        return np.where(k >= 0, self.t[np.clip(k, 0, None)], 1.0)

    def _step_second_moment(self, z):
        k = np.searchsorted(self.x, z, side="right") - 1
        return float(self._m2_above[k]) if k >= 0 else float(self._m2_above[0])

    def truncated_second_moment(self, z):
        z = np.asarray(z, dtype=float)
        k = np.searchsorted(self.x, z, side="right") - 1
        return self._m2_above[np.clip(k, 0, None)]

    @functools.cached_property
    def second_moment(self):
        return float(self._m2_above[0])

    def abs_moment(self, p):
        return float(np.sum(self.x ** p * self.mass))

    def __repr__(self):
        return f"StepTail(n_points={self.x.size}, x_max={self.x[-1]:g})"


# --------------------------------------------------------------------------
# G(m, r) summands
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GmrSpec:
    """Symmetric summand with ``P(|xi| > x) = exp(-C1 x^m log^r(C2 + x))``.

    ``m = inf`` is the bounded sentinel: ``|xi| = ess_sup`` almost surely.
    """

    m: float
    r: float = 0.0
    C1: float = 1.0
    C2: float = math.e
    ess_sup: float = 1.0

    def __post_init__(self):
        if not (self.m > 0):
            raise DomainError(f"m must be positive, got {self.m}")
        if math.isinf(self.m):
            if not (self.ess_sup > 0 and math.isfinite(self.ess_sup)):
                raise DomainError("bounded summand needs a finite positive ess_sup")
            return
        if not (self.C1 > 0):
            raise DomainError("C1 must be positive")
        if not (self.C2 >= math.e):
            raise DomainError("C2 must be >= e")
        if self.r < 0:
            # exponent x^m log^r(C2+x) is non-decreasing iff m log(C2+x) >= |r| x/(C2+x)
            xs = np.concatenate([[0.0], np.geomspace(1e-6, 1e8, 4000)])
            slack = self.m * np.log(self.C2 + xs) + self.r * xs / (self.C2 + xs)
            if np.min(slack) < 0:
                raise DomainError(
                    f"tail exp(-C1 x^{self.m} log^{self.r}(C2+x)) is not monotone; "
                    f"increase C2 (C2 >= exp(|r|/m) = {math.exp(-self.r / self.m):.4g} suffices)")

    @property
    def bounded(self):
        return math.isinf(self.m)

    @property
    def exponents(self):
        return ml_exponents(self.m, self.r)

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        if self.bounded:
            with np.errstate(divide="ignore"):
                return np.where(x < self.ess_sup, 0.0, -np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            expo = self.C1 * np.power(x, self.m) * np.power(np.log(self.C2 + x), self.r)
        return np.where(x <= 0, 0.0, -expo)

    def tail(self):
        return GmrTail(self)

    @functools.cached_property
    def variance(self):
        return self.tail().second_moment

    @property
    def sigma(self):
        return math.sqrt(self.variance)

    def cumulant(self):
        from .bound_engine import CumulantModel
        return CumulantModel.from_tail(self.tail())

    def sample(self, rng, size):
        return sample_gmr_symmetric(self, rng, size)

    def sample_sums(self, rng, counts):
        """Sums of ``counts[i]`` independent summands, one per entry."""
        counts = np.asarray(counts, dtype=np.int64)
        if self.bounded:
            heads = rng.binomial(counts, 0.5)
            return self.ess_sup * (2.0 * heads - counts)
        return _sum_blocks(self.sample(rng, int(counts.sum())), counts)

    def to_dict(self):
        d = {"kind": "gmr", "m": self.m, "r": self.r, "C1": self.C1, "C2": self.C2}
        if self.bounded:
            d = {"kind": "gmr", "m": "inf", "ess_sup": self.ess_sup}
        return d


def TwoPointPM1():
    """The symmetric +-1 summand (bounded G(inf, r) member)."""
    return GmrSpec(m=INF, ess_sup=1.0)


@dataclass(frozen=True)
class Normal:
    """Centered normal summand."""

    sigma: float = 1.0

    def __post_init__(self):
        if not (self.sigma > 0):
            raise DomainError("sigma must be positive")

    @property
    def variance(self):
        return self.sigma ** 2

    @property
    def exponents(self):
        return ml_exponents(2.0, 0.0)

    def tail(self):
        return NormalTail(self.sigma)

    def cumulant(self):
        from .bound_engine import CumulantModel
        return CumulantModel.normal(self.sigma)

    def sample(self, rng, size):
        return self.sigma * rng.standard_normal(size)

    def sample_sums(self, rng, counts):
        counts = np.asarray(counts)
        # a sum of n iid N(0, s^2) is exactly N(0, n s^2)
        return self.sigma * np.sqrt(counts) * rng.standard_normal(counts.shape)

    def to_dict(self):
        return {"kind": "normal", "sigma": self.sigma}


def _sum_blocks(values, counts):
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return np.add.reduceat(values, starts)


class GmrTail(TailFunction):
    """Tail function of a :class:`GmrSpec`."""

    def __init__(self, spec):
        self.spec = spec
        if spec.bounded:
            self._step = StepTail([0.0, spec.ess_sup], [1.0, 0.0])
            self.breakpoints = (spec.ess_sup,)
        else:
            self._step = None
            self._m2_cache = {}

    def log_tail(self, x):
        return self.spec.log_tail(x)

    def __call__(self, x):
        return np.exp(self.log_tail(x))

    @functools.cached_property
    def second_moment(self):
        return float(self.truncated_second_moment(0.0))

    def truncated_second_moment(self, z):
        if self._step is not None:
            return self._step.truncated_second_moment(z)
        s = self.spec
        z = np.asarray(z, dtype=float)
        if s.r == 0:
            # 2 int_z^inf y e^{-C1 y^m} dy = (2/m) C1^{-2/m} Gamma(2/m) Q(2/m, C1 z^m)
            a = 2.0 / s.m
            head = z * z * np.exp(-s.C1 * z ** s.m)
            return head + a * s.C1 ** (-a) * special.gamma(a) * special.gammaincc(a, s.C1 * z ** s.m)

        def one(zz):
            key = float(zz)
            if key not in self._m2_cache:
                self._m2_cache[key] = second_moment_tail(self, key)
            return self._m2_cache[key]

        return np.vectorize(one, otypes=[float])(z)

    def abs_moment(self, p):
        if self._step is not None:
            return self._step.abs_moment(p)
        s = self.spec
        if s.r == 0:
            a = p / s.m
            return float(a * s.C1 ** (-a) * special.gamma(a))
        return super().abs_moment(p)

    def __repr__(self):
        return f"GmrTail({self.spec})"


def gmr_tail(spec, x):
    """``min(1, exp(-C1 x^m log^r(C2 + x)))`` for ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("gmr_tail is defined for x >= 0")
    return np.minimum(1.0, np.exp(spec.log_tail(x)))


def sample_gmr_symmetric(spec, rng, size=None):
    """Symmetric draws whose absolute value has tail ``gmr_tail(spec, .)``.

    The absolute value is obtained by inverting the tail with bisection on
    ``log T`` (bracket doubled from [0, 1]); the tail value at the returned
    point matches the uniform target to within 1e-10.
    """
    scalar = size is None
    n = 1 if scalar else int(np.prod(size))
    signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    if spec.bounded:
        out = spec.ess_sup * signs
    else:
        u = rng.random(n)
        # u in (0, 1]: 1 - U avoids log(0)
        target = np.log1p(-u)
        out = signs * _invert_log_tail(spec.log_tail, target)
    if scalar:
        return float(out[0])
    return out.reshape(size)


def _invert_log_tail(log_tail, target, max_iter=400):
    """Solve ``log_tail(x) = target`` for each entry (log_tail decreasing)."""
    target = np.asarray(target, dtype=float)
    lo = np.zeros_like(target)
    hi = np.ones_like(target)
    for _ in range(2000):
        grow = log_tail(hi) > target
        if not grow.any():
            break
        lo = np.where(grow, hi, lo)
        hi = np.where(grow, hi * 2.0, hi)
    else:
        raise NumericalError("bracket expansion failed while inverting the tail")
    tgt_tail = np.exp(target)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        above = log_tail(mid) > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        width_ok = hi - lo <= 1e-13 * np.maximum(hi, 1e-300)
        if width_ok.all():
            break
    x = 0.5 * (lo + hi)
    err = np.abs(np.exp(log_tail(x)) - tgt_tail)
    if np.any(err > SAMPLER_TAIL_TOL) or not np.all(np.isfinite(x)):
        raise NumericalError("tail inversion did not reach tolerance",
                             {"max_tail_error": float(np.max(err))})
    return x


# --------------------------------------------------------------------------
# Orlicz norm
# --------------------------------------------------------------------------

def lp_norms(samples, p_grid):
    """Empirical ``(E|tau|^p)^(1/p)`` for each p, computed without overflow."""
    a = np.abs(np.asarray(samples, dtype=float)).ravel()
    if a.size == 0:
        raise DomainError("need at least one sample")
    top = a.max()
    if top == 0:
        return np.zeros(len(p_grid))
    scaled = a / top
    return np.array([top * np.mean(scaled ** p) ** (1.0 / p) for p in p_grid])


def orlicz_norm_estimate(samples, m, r=0.0, p_grid=DEFAULT_P_GRID):
    """Grid estimate of ``sup_{p>=2} |tau|_p p^(-1/m) log^(r/m) p``.

    Only the supremum over ``p_grid`` is taken; for laws outside G(m, r) the
    estimate keeps growing as the grid is extended.
    """
    p = np.asarray(p_grid, dtype=float)
    if np.any(p < 2):
        raise DomainError("p_grid values must be >= 2")
    norms = lp_norms(samples, p)
    weights = p ** (-1.0 / m) * np.log(p) ** (r / m)
    return float(np.max(norms * weights))
