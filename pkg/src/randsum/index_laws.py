"""Laws of the random number of summands."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .errors import DomainError

MIN_MEAN = 2.0


class IndexLaw:
    """Integer law on {1, 2, ...} with mean ``A >= 2``.

    Subclasses provide ``logpmf``, ``sf`` (``P(eta > n)``), ``sample`` and ``mean``.
    """

    #: largest support point, or inf
    support_max = math.inf

    def pmf(self, n):
        return np.exp(self.logpmf(n))

    def truncation_point(self, eps):
        """Smallest n with ``P(eta > n) < eps`` (for finite support, the support max)."""
        if math.isfinite(self.support_max):
            return int(self.support_max)
        n = max(1, int(math.ceil(self.mean)))
        while self.sf(n) >= eps:
            n *= 2
        lo, hi = 0, n  # sf(0) = 1 >= eps, sf(hi) < eps
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.sf(mid) < eps:
                hi = mid
            else:
                lo = mid
        return hi

    def series(self, eps=1e-12):
        """``(n, q_n, remainder)`` with ``remainder = P(eta > n_max) < eps``."""
        n_max = self.truncation_point(eps)
        n = np.arange(1, n_max + 1)
        q = self.pmf(n)
        rem = float(self.sf(n_max)) if math.isfinite(n_max) else 0.0
        return n, q, max(rem, 0.0)

    def _check_mean(self):
        if not (self.mean >= MIN_MEAN - 1e-12):
            raise DomainError(f"index mean A = {self.mean} must be >= 2")


@dataclass(frozen=True)
class Geometric(IndexLaw):
    """``P(eta = n) = A^-1 (1 - 1/A)^(n-1)``."""

    A: float

    def __post_init__(self):
        self._check_mean()

    @property
    def mean(self):
        return float(self.A)

    def logpmf(self, n):
        n = np.asarray(n, dtype=float)
        return -math.log(self.A) + (n - 1) * math.log1p(-1.0 / self.A)

    def sf(self, n):
        return np.exp(np.asarray(n, dtype=float) * math.log1p(-1.0 / self.A))

    def sample(self, rng, size):
        return rng.geometric(1.0 / self.A, size=size).astype(np.int64)

    def to_dict(self):
        return {"kind": "geometric", "A": self.A}


@dataclass(frozen=True)
class ShiftedPoisson(IndexLaw):
    """``eta - 1 ~ Poisson(A - 1)``."""

    A: float

    def __post_init__(self):
        self._check_mean()

    @property
    def mean(self):
        return float(self.A)

    def logpmf(self, n):
        n = np.asarray(n, dtype=float)
        b = self.A - 1.0
        return -b + (n - 1) * math.log(b) - gammaln(n)

    def sf(self, n):
        return stats.poisson.sf(np.asarray(n) - 1, self.A - 1.0)

    def sample(self, rng, size):
        return 1 + rng.poisson(self.A - 1.0, size=size).astype(np.int64)

    def to_dict(self):
        return {"kind": "shifted_poisson", "A": self.A}


@dataclass(frozen=True)
class Deterministic(IndexLaw):
    n: int

    def __post_init__(self):
        if int(self.n) != self.n:
            raise DomainError("deterministic index must be an integer")
        self._check_mean()

    @property
    def mean(self):
        return float(self.n)

    @property
    def support_max(self):
        return int(self.n)

    def logpmf(self, k):
        k = np.asarray(k)
        with np.errstate(divide="ignore"):
            return np.where(k == self.n, 0.0, -np.inf)

    def sf(self, k):
        return np.where(np.asarray(k) >= self.n, 0.0, 1.0)

    def sample(self, rng, size):
        return np.full(size, int(self.n), dtype=np.int64)

    def to_dict(self):
        return {"kind": "deterministic", "n": int(self.n)}


class Explicit(IndexLaw):
    """Finite law given by ``probs[k] = P(eta = k + 1)``."""

    def __init__(self, probs):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise DomainError("explicit law needs a non-empty probability vector")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise DomainError("explicit probabilities must be >= 0 and sum to 1 (within 1e-12)")
        self.probs = p
        self._tail = np.concatenate([1.0 - np.cumsum(p)[:-1], [0.0]]).clip(0.0)
        self._check_mean()

    @property
    def mean(self):
        return float(np.sum(np.arange(1, self.probs.size + 1) * self.probs))

    @property
    def support_max(self):
        return int(self.probs.size)

    def logpmf(self, n):
        n = np.asarray(n)
        idx = np.clip(n - 1, 0, self.probs.size - 1)
        inside = (n >= 1) & (n <= self.probs.size)
        with np.errstate(divide="ignore"):
            return np.where(inside, np.log(self.probs[idx]), -np.inf)

    def sf(self, n):
        n = np.asarray(n)
        idx = np.clip(n - 1, 0, self.probs.size - 1)
        return np.where(n < 1, 1.0, np.where(n >= self.probs.size, 0.0, self._tail[idx]))

    def sample(self, rng, size):
        return 1 + rng.choice(self.probs.size, size=size, p=self.probs).astype(np.int64)

    def to_dict(self):
        return {"kind": "explicit", "probs": self.probs.tolist()}

    def __eq__(self, other):
        return isinstance(other, Explicit) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    def __repr__(self):
        return f"Explicit(support_max={self.support_max}, mean={self.mean:g})"


class TwoPoint(Explicit):
    """``P(eta = 2) = 1 - alpha``, ``P(eta = 1/alpha) = alpha`` with ``1/alpha`` an integer >= 3."""

    def __init__(self, alpha):
        k = 1.0 / alpha
        if abs(k - round(k)) > 1e-9 or round(k) < 3:
            raise DomainError("1/alpha must be an integer >= 3")
        k = int(round(k))
        self.alpha = 1.0 / k
        self.big = k
        probs = np.zeros(k)
        probs[1] = 1.0 - self.alpha
        probs[k - 1] += self.alpha
        super().__init__(probs)

    def to_dict(self):
        return {"kind": "two_point", "alpha": self.alpha}

    def __repr__(self):
        return f"TwoPoint(alpha=1/{self.big})"


def law_from_dict(d):
    kind = d.get("kind")
    if kind == "geometric":
        return Geometric(float(d["A"]))
    if kind == "shifted_poisson":
        return ShiftedPoisson(float(d["A"]))
    if kind == "deterministic":
        return Deterministic(int(d["n"]))
    if kind == "two_point":
        return TwoPoint(float(d["alpha"]))
    if kind == "explicit":
        return Explicit(d["probs"])
    raise DomainError(f"unknown index law kind {kind!r}")
