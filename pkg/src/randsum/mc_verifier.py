"""Monte Carlo for compound sums: empirical tails, moments and stopped sums.

Every simulation is split into fixed-size batches; batch ``k`` draws from
its own PCG64 stream spawned from ``SeedSequence(seed)``.  Results therefore
depend only on ``(seed, N, spec)`` and are bit-identical across runs and
across worker counts.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._numerics import clopper_pearson
from .bound_engine import stopping_exponents
from .errors import DomainError, InfeasibleError
from .index_laws import IndexLaw
from .reporting import Table, stable_hash
from .tail_core import GmrSpec, Normal, lp_norms

BATCH = 1 << 16
GENERATOR = "numpy.random.PCG64 via SeedSequence.spawn"
MIN_N = 1000
DEFAULT_MOMENT_P = (2, 3, 4, 6, 8, 12, 16)


def _streams(seed, n_batches):
    ss = np.random.SeedSequence(int(seed))
    return [np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(n_batches)]


def run_batches(N, seed, fn, workers=1):
    """Call ``fn(rng, size)`` on consecutive batches and return results in batch order."""
    n_batches = max(1, math.ceil(N / BATCH))
    sizes = [BATCH] * (n_batches - 1) + [N - BATCH * (n_batches - 1)]
    rngs = _streams(seed, n_batches)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, rngs, sizes))
    return [fn(r, s) for r, s in zip(rngs, sizes)]


def summand_exponents(summand):
    if isinstance(summand, Normal):
        return 2.0, 0.0
    return float(summand.m), float(summand.r)


@dataclass(frozen=True)
class CompoundSpec:
    """``S = sum_{i <= eta} xi_i / (sigma sqrt A)`` with eta independent of the summands."""

    summand: object
    index: IndexLaw

    @property
    def sigma(self):
        return math.sqrt(self.summand.variance)

    @property
    def A(self):
        return self.index.mean

    def to_dict(self):
        return {"summand": self.summand.to_dict(), "index": self.index.to_dict()}

    def spec_hash(self):
        return stable_hash(self.to_dict())

    def sample(self, rng, size):
        eta = self.index.sample(rng, size)
        sums = self.summand.sample_sums(rng, eta)
        return sums / (self.sigma * math.sqrt(self.A)), eta


@dataclass
class EmpiricalTail:
    """Two-sided tail estimates ``max(P(S >= x), P(S <= -x))`` with exact binomial intervals."""

    x: np.ndarray
    estimate: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    hits: np.ndarray
    N: int
    seed: int
    spec_hash: str
    confidence: float = 0.99
    hits_pos: np.ndarray = None
    hits_neg: np.ndarray = None
    meta: dict = field(default_factory=dict)
    overlays: dict = field(default_factory=dict)

    CSV_COLUMNS = ("x", "estimate", "ci_low", "ci_high", "hits", "N")

    def feasible(self, min_hits=100):
        return self.hits >= min_hits

    def require_feasible(self, min_hits=100):
        ok = self.feasible(min_hits)
        if not ok.all():
            good = self.x[ok]
            rng = (float(good.min()), float(good.max())) if good.size else None
            raise InfeasibleError(
                f"fewer than {min_hits} hits at x = {self.x[~ok].tolist()}; "
                f"feasible range with N={self.N}: {rng}", feasible=rng)
        return self

    def restrict(self, mask):
        """Copy keeping only grid points where ``mask`` holds."""
        mask = np.asarray(mask, dtype=bool)
        pick = lambda a: None if a is None else np.asarray(a)[mask]
        return EmpiricalTail(
            x=self.x[mask], estimate=self.estimate[mask], ci_low=self.ci_low[mask],
            ci_high=self.ci_high[mask], hits=self.hits[mask], N=self.N, seed=self.seed,
            spec_hash=self.spec_hash, confidence=self.confidence,
            hits_pos=pick(self.hits_pos), hits_neg=pick(self.hits_neg), meta=dict(self.meta),
            overlays={k: np.asarray(v)[mask] for k, v in self.overlays.items()})

    def to_table(self):
        cols = {
            "x": self.x, "estimate": self.estimate, "ci_low": self.ci_low,
            "ci_high": self.ci_high, "hits": self.hits.astype(np.int64),
            "N": np.full(self.x.size, self.N, dtype=np.int64),
        }
        cols.update(self.overlays)
        meta = dict(self.meta, N=self.N, seed=self.seed, spec_hash=self.spec_hash,
                    confidence=self.confidence, generator=GENERATOR)
        return Table(cols, meta)


def _count_tails(samples, x):
    s = np.sort(samples)
    pos = s.size - np.searchsorted(s, x, side="left")
    neg = np.searchsorted(s, -x, side="right")
    return pos, neg


def _tail_from_counts(x, pos, neg, N, seed, spec_hash, confidence, meta):
    hits = np.maximum(pos, neg)
    lo, hi = clopper_pearson(hits, N, confidence)
    return EmpiricalTail(x=x, estimate=hits / N, ci_low=lo, ci_high=hi, hits=hits, N=N,
                         seed=seed, spec_hash=spec_hash, confidence=confidence,
                         hits_pos=pos, hits_neg=neg, meta=meta)


def _simulate_counts(sampler, x, N, seed, workers):
    def one(rng, size):
        return _count_tails(sampler(rng, size), x)

    parts = run_batches(N, seed, one, workers)
    pos = np.sum([p for p, _ in parts], axis=0)
    neg = np.sum([n for _, n in parts], axis=0)
    return pos, neg


def simulate_tail(spec, x_grid, N, seed, confidence=0.99, min_hits=None, workers=1):
    """Empirical two-sided tail of the normed compound sum on ``x_grid``.

    With ``min_hits`` the feasibility gate is enforced: any grid point with
    fewer hits raises :class:`InfeasibleError` naming the feasible range.
    """
    if N < MIN_N:
        raise DomainError(f"N must be >= {MIN_N}")
    x = np.asarray(x_grid, dtype=float)
    pos, neg = _simulate_counts(lambda r, s: spec.sample(r, s)[0], x, N, seed, workers)
    tail = _tail_from_counts(x, pos, neg, N, seed, spec.spec_hash(), confidence,
                             {"spec": spec.to_dict()})
    if min_hits:
        tail.require_feasible(min_hits)
    return tail


def simulate_normalized_sum_tail(summand, n, x_grid, N, seed, confidence=0.99, workers=1):
    """Empirical tail of ``n^(-1/2) sum_{i<=n} xi_i / sigma`` for a fixed ``n >= 1``."""
    if N < MIN_N:
        raise DomainError(f"N must be >= {MIN_N}")
    if n < 1:
        raise DomainError("n must be >= 1")
    x = np.asarray(x_grid, dtype=float)
    scale = 1.0 / (math.sqrt(summand.variance) * math.sqrt(n))

    def sampler(rng, size):
        return summand.sample_sums(rng, np.full(size, n, dtype=np.int64)) * scale

    pos, neg = _simulate_counts(sampler, x, N, seed, workers)
    meta = {"summand": summand.to_dict(), "n": int(n)}
    return _tail_from_counts(x, pos, neg, N, seed, stable_hash(meta), confidence, meta)


def loglog_slope(x, estimate, hits=None, x_min=2.0, min_hits=100):
    """Least-squares slope of ``log(-log T)`` against ``log x`` over feasible points."""
    x = np.asarray(x, dtype=float)
    est = np.asarray(estimate, dtype=float)
    ok = (x >= x_min) & (est > 0) & (est < 1)
    if hits is not None:
        ok &= np.asarray(hits) >= min_hits
    if ok.sum() < 2:
        raise InfeasibleError("fewer than two feasible points for the slope fit")
    return float(np.polyfit(np.log(x[ok]), np.log(-np.log(est[ok])), 1)[0])


# --------------------------------------------------------------------------
# moments
# --------------------------------------------------------------------------

def bootstrap_lp(samples, p_grid, rng, n_boot=200):
    """Point estimates, standard errors and bootstrap replicates of ``|S|_p``."""
    a = np.abs(np.asarray(samples, dtype=float))
    est = lp_norms(a, p_grid)
    reps = np.empty((n_boot, len(p_grid)))
    for b in range(n_boot):
        reps[b] = lp_norms(a[rng.integers(0, a.size, a.size)], p_grid)
    return est, reps.std(axis=0, ddof=1), reps


def _ci(reps, level):
    q = (1 - level) / 2
    return np.quantile(reps, q, axis=0), np.quantile(reps, 1 - q, axis=0)


def burkholder_constant(p, C_B=1.0):
    """``C_B p / log p`` (the absolute constant ``C_B`` is not known; default 1)."""
    p = np.asarray(p, dtype=float)
    return C_B * p / np.log(p)


def empirical_moments(spec, p_grid=DEFAULT_MOMENT_P, N=100_000, seed=0, n_boot=200,
                      C_B=1.0, level=0.99):
    """``|S|_p`` with bootstrap CIs next to ``B(p) |eta|_p^(1/2) |xi|_p / (sigma sqrt A)``."""
    p = np.asarray(p_grid, dtype=float)
    if np.any(p < 2):
        raise DomainError("p_grid values must be >= 2")
    parts = run_batches(N, seed, lambda r, s: spec.sample(r, s))
    S = np.concatenate([s for s, _ in parts])
    eta = np.concatenate([e for _, e in parts])
    xi = np.concatenate(run_batches(N, seed + 1, lambda r, s: spec.summand.sample(r, s)))
    boot_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 2])))
    est, se, reps = bootstrap_lp(S, p, boot_rng, n_boot)
    lo, hi = _ci(reps, level)
    eta_p = lp_norms(eta, p)
    xi_p = lp_norms(xi, p)
    rhs = burkholder_constant(p, C_B) * np.sqrt(eta_p) * xi_p / (spec.sigma * math.sqrt(spec.A))
    return Table(
        {"p": p, "S_p": est, "se": se, "ci_low": lo, "ci_high": hi,
         "eta_p": eta_p, "xi_p": xi_p, "B_p": burkholder_constant(p, C_B), "rhs_eq0": rhs},
        {"N": N, "seed": seed, "n_boot": n_boot, "C_B": C_B, "level": level,
         "spec": spec.to_dict(), "spec_hash": spec.spec_hash(), "generator": GENERATOR},
    )


def poisson_centered_moment(A, p, tol=1e-16):
    """Exact ``|tau - A|_p`` for ``tau ~ Poisson(A)`` by summing the mass function."""
    from scipy import stats
    hi = int(stats.poisson.isf(tol, A)) + 10
    k = np.arange(0, hi + 1)
    w = stats.poisson.pmf(k, A)
    return float(np.sum(w * np.abs(k - A) ** p) ** (1.0 / p))


# --------------------------------------------------------------------------
# stopped sums
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FirstPassage:
    """Stop at the first n with ``|xi_1 + ... + xi_n| >= level``."""

    level: float
    is_stopping_time = True

    def to_dict(self):
        return {"rule": "first_passage", "level": self.level}


@dataclass(frozen=True)
class FixedWindowMax:
    """Index of the first maximum of the partial sums over ``1..window``.

    Looks ahead, so it is *not* a stopping time; kept as a contrast case.
    """

    window: int
    is_stopping_time = False

    def to_dict(self):
        return {"rule": "fixed_window_max", "window": self.window}


@dataclass(frozen=True)
class Independent:
    law: IndexLaw
    is_stopping_time = True

    def to_dict(self):
        return {"rule": "independent", "law": self.law.to_dict()}


def _simulate_rule(rule, summand, rng, size, cap):
    """Return ``(sums, eta, n_truncated)`` for one batch of paths."""
    if isinstance(rule, Independent):
        eta = np.minimum(rule.law.sample(rng, size), cap)
        return summand.sample_sums(rng, eta), eta, 0
    if isinstance(rule, FixedWindowMax):
        steps = summand.sample(rng, (size, rule.window))
        path = np.cumsum(steps, axis=1)
        k = np.argmax(path, axis=1)
        return path[np.arange(size), k], k + 1, 0
    if isinstance(rule, FirstPassage):
        partial = np.zeros(size)
        eta = np.full(size, cap, dtype=np.int64)
        active = np.arange(size)
        for step in range(1, cap + 1):
            partial[active] += summand.sample(rng, active.size)
            done = np.abs(partial[active]) >= rule.level
            eta[active[done]] = step
            active = active[~done]
            if active.size == 0:
                break
        return partial, eta, int(active.size)
    raise DomainError(f"unknown stopping rule {rule!r}")


def fit_tail_exponents(eta, min_count=20, fit_log=False):
    """Fit ``T(eta, x) ~ exp(-C x^a log^b x)`` on the upper decade of observed values.

    Least squares of ``log(-log T_hat(x))`` on ``(1, log x, log log x)``; with
    ``fit_log=False`` the log-log term is dropped and ``b = 0``.  Heuristic.
    """
    eta = np.sort(np.asarray(eta))
    N = eta.size
    xs = np.unique(eta)
    ge = N - np.searchsorted(eta, xs, side="left")
    ok = ge >= min_count
    if not ok.any():
        raise InfeasibleError("not enough large observations to fit the index tail")
    x_hi = float(xs[ok].max())
    sel = ok & (xs >= max(x_hi / 10.0, 3.0)) & (ge < N)
    if sel.sum() < 3:
        raise InfeasibleError("upper decade of the index has fewer than 3 distinct values")
    x = xs[sel].astype(float)
    y = np.log(-np.log(ge[sel] / N))
    if fit_log:
        X = np.column_stack([np.ones_like(x), np.log(x), np.log(np.log(x))])
        c0, a, b = np.linalg.lstsq(X, y, rcond=None)[0]
    else:
        a, c0 = np.polyfit(np.log(x), y, 1)
        b = 0.0
    return float(a), float(b), float(c0)


@dataclass
class StoppingResult:
    table: Table
    exponents: object
    a: float
    b: float
    A: float
    slope: float
    truncation_mass: float
    is_stopping_time: bool


def stopping_time_experiment(rule, summand, p_grid=DEFAULT_MOMENT_P, N=100_000, seed=0,
                             cap=1_000_000, n_boot=200, fit_log=False, C_B=1.0, level=0.99):
    """Stopped-sum moments against the stopping-time exponent calculus.

    The index tail is fitted to ``(a, b)``; the summand contributes ``(m, r)``.
    The moment curve ``p^(1/q) log^(-w/q) p`` is anchored at ``p = 2``.
    """
    parts = run_batches(N, seed, lambda r, s: _simulate_rule(rule, summand, r, s, cap))
    sums = np.concatenate([p[0] for p in parts])
    eta = np.concatenate([p[1] for p in parts])
    truncated = sum(p[2] for p in parts)
    trunc_mass = truncated / N
    if trunc_mass >= 1e-4:
        raise DomainError(f"index cap {cap} hit with frequency {trunc_mass:.2e} (>= 1e-4)")
    A = float(eta.mean())
    S = sums / (math.sqrt(summand.variance) * math.sqrt(A))
    a, b, _ = fit_tail_exponents(eta, fit_log=fit_log)
    m, r = summand_exponents(summand)
    exps = stopping_exponents(a, b, m, r)
    p = np.asarray(p_grid, dtype=float)
    boot_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 3])))
    est, se, reps = bootstrap_lp(S, p, boot_rng, n_boot)
    lo, hi = _ci(reps, level)
    curve = exps.moment_curve(p)
    i2 = int(np.argmin(np.abs(p - 2.0)))
    curve = curve * est[i2] / curve[i2]
    eta_p = lp_norms(eta, p)
    xi_p = lp_norms(summand.sample(boot_rng, N), p)
    rhs = burkholder_constant(p, C_B) * np.sqrt(eta_p) * xi_p / (math.sqrt(summand.variance) * math.sqrt(A))
    slope = float(np.polyfit(np.log(p), np.log(est), 1)[0])
    meta = {"rule": rule.to_dict(), "summand": summand.to_dict(), "N": N, "seed": seed,
            "cap": cap, "A_hat": A, "truncation_mass": trunc_mass, "fit": {"a": a, "b": b},
            "q": exps.q, "w": exps.w, "slope": slope, "generator": GENERATOR}
    table = Table({"p": p, "S_p": est, "se": se, "ci_low": lo, "ci_high": hi,
                   "theorem_curve": curve, "rhs_eq0": rhs}, meta)
    return StoppingResult(table, exps, a, b, A, slope, trunc_mass, rule.is_stopping_time)
