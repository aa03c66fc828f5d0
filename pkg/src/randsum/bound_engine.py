"""Upper bounds for tails of normed random sums.

The central objects are the truncation operator ``W[T]``, the Legendre
transform ``chi*`` of the envelope ``chi(lam) = sup_n n phi(lam / sqrt n)``, their
combination ``Q`` and the random-index mixture ``E Q(sigma x sqrt(A / eta))``.
All bound-producing functions are vectorised over ``x``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import threading
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from ._numerics import golden_minimize
from .errors import DomainError, NumericalError
from .index_laws import Geometric, ShiftedPoisson
from .tail_core import GmrTail, NormalTail, StepTail

BRANCHES = ("chi-star", "W", "chebyshev")

CHI_LINEAR_N = 64
CHI_GEOM_FACTOR = 1.05
CHI_N_CAP = 10 ** 9
CHI_STALL = 50
LEGENDRE_XTOL = 1e-10
W_XTOL = 1e-10
W_COARSE = 64
# exp(-y^2 / (8 z^2)) underflows to 0 below z = y / 80; above z = y it exceeds 1/4
W_ZMIN_FACTOR = 1.0 / 80.0
MGF_RTOL = 1e-8


# --------------------------------------------------------------------------
# cumulant models
# --------------------------------------------------------------------------

class CumulantModel:
    """``phi(lam) = max_+- log E exp(+-lam xi)`` with its variance and Kramer radius.

    ``phi`` must accept arrays and return ``inf`` where the exponential moment
    is infinite.  ``variance`` fixes the small-lambda behaviour
    ``phi(lam) ~ variance lam^2 / 2`` used for the ``n -> inf`` limit of ``chi``.
    """

    def __init__(self, phi, variance, radius=math.inf, source="closed-form", name=""):
        self._phi = phi
        self.variance = float(variance)
        self.radius = radius
        self.source = source
        self.name = name

    def phi(self, lam):
        lam = np.abs(np.asarray(lam, dtype=float))
        return self._phi(lam)

    def __repr__(self):
        return f"CumulantModel({self.name or self.source}, variance={self.variance:g})"

    @classmethod
    def normal(cls, sigma=1.0):
        s2 = float(sigma) ** 2
        return cls(lambda u: 0.5 * s2 * u * u, s2, name=f"normal(sigma={sigma})")

    @classmethod
    def two_point(cls, b=1.0):
        """Symmetric +-b summand: ``log cosh(b lam)``."""
        return cls(lambda u: _log_cosh(b * u), b * b, name=f"two-point(+-{b})")

    @classmethod
    def from_tail(cls, T):
        """Model for a symmetric law with absolute tail ``T``.

        Normal and step tails get exact formulas; other tails use quadrature of
        ``E cosh(lam |xi|) = 1 + int lam sinh(lam y) T(y) dy``.
        """
        if isinstance(T, NormalTail):
            return cls.normal(T.sigma)
        step = as_step(T)
        if step is not None:
            return cls._from_step(step)
        q = _QuadratureCumulant(T)
        return cls(q, q.variance, radius=q.radius_hint, source="numeric-from-tail", name=repr(T))

    @classmethod
    def _from_step(cls, step):
        x = step.x[step.mass > 0]
        mass = step.mass[step.mass > 0]
        if x.size == 1:
            return cls.two_point(float(x[0]))
        logm = np.log(mass) - math.log(2.0)

        def phi(u):
            u = np.asarray(u, dtype=float)
            ux = u[..., None] * x
            # E cosh(u|xi|) - 1 = E 2 sinh^2(u|xi|/2) keeps small-u accuracy
            small = np.log1p(np.sum(mass * 2.0 * np.sinh(0.5 * np.minimum(ux, 40.0)) ** 2, axis=-1))
            stacked = np.concatenate([ux + logm, -ux + logm], axis=-1)
            large = logsumexp(stacked, axis=-1)
            return np.maximum(np.where(u * x[-1] < 20.0, small, large), 0.0)
        return cls(phi, step.second_moment, source="closed-form", name=repr(step))

    @classmethod
    def from_samples(cls, samples, chunk=64):
        """Empirical model from (re-centred) samples."""
        x = np.asarray(samples, dtype=float).ravel()
        x = x - x.mean()
        logn = math.log(x.size)

        def phi(u):
            u = np.asarray(u, dtype=float)
            flat = u.ravel()
            out = np.empty_like(flat)
            for i in range(0, flat.size, chunk):
                uu = flat[i:i + chunk, None] * x
                if np.max(np.abs(uu), initial=0.0) < 20.0:
                    up = np.log1p(np.mean(np.expm1(uu), axis=1))
                    dn = np.log1p(np.mean(np.expm1(-uu), axis=1))
                else:
                    up = logsumexp(uu, axis=1) - logn
                    dn = logsumexp(-uu, axis=1) - logn
                out[i:i + chunk] = np.maximum(np.maximum(up, dn), 0.0)
            return out.reshape(u.shape)
        return cls(phi, float(np.mean(x * x)), source="sample-based", name=f"samples(n={x.size})")


def _log_cosh(t):
    t = np.abs(np.asarray(t, dtype=float))
    with np.errstate(over="ignore"):
        small = np.log1p(2.0 * np.sinh(0.5 * np.minimum(t, 40.0)) ** 2)
    large = t + np.log1p(np.exp(-2.0 * t)) - math.log(2.0)
    return np.where(t < 20.0, small, large)


def as_step(T):
    """Return the :class:`StepTail` behind ``T`` if it is a step function."""
    if isinstance(T, StepTail):
        return T
    if isinstance(T, GmrTail) and T._step is not None:
        return T._step
    return None


class _QuadratureCumulant:
    """Lazy table of ``phi`` on a log grid of lambda, filled by quadrature and
    interpolated cubically in log-log coordinates."""

    PER_DECADE = 200

    def __init__(self, T):
        self.T = T
        self.variance = T.second_moment
        self.m4 = T.abs_moment(4)
        self.u_small = 1e-3 / math.sqrt(self.variance)
        self.h = math.log(10.0) / self.PER_DECADE
        self._table = {}
        self._direct = {}
        self._near = {}
        self._lock = threading.Lock()
        spec = getattr(T, "spec", None)
        self.radius_hint = _gmr_radius(spec) if spec is not None else math.nan

    def _node(self, k):
        return math.exp(k * self.h)

    def exact(self, u):
        """``phi(u)`` by quadrature; ``inf`` if the integral diverges (Kramer fails)."""
        if u == 0:
            return 0.0
        logT = self.T.log_tail

        def expo(y):
            return u * y + logT(y)

        ys = np.concatenate([[0.0], np.geomspace(1e-6, 1e7, 2000)])
        with np.errstate(invalid="ignore", over="ignore"):
            ev = expo(ys)
        ev = np.where(np.isnan(ev), -np.inf, ev)
        k = int(np.argmax(ev))
        if k == ys.size - 1 or not np.isfinite(ev[k]):
            return math.inf
        e_max = max(float(ev[k]), 0.0)
        y_peak = float(ys[k])

        def integrand(y):
            lt = float(logT(y)) - e_max
            uy = u * y
            if uy < 30.0:
                return u * math.sinh(uy) * math.exp(lt)
            return 0.5 * u * math.exp(uy + lt)

        after = np.flatnonzero((ev < e_max - 40.0) & (np.arange(ys.size) > k))
        Y = float(ys[after[0]]) if after.size else 2.0 * max(y_peak, 1.0)
        # dyadic pieces: one quad over a long range can miss the structure near 0
        first = min(1.0, 0.25 / u, 0.5 * Y)
        edges = [0.0] + [first * 2.0 ** k for k in range(int(math.log2(Y / first)) + 1)]
        if y_peak > 0:
            edges.append(y_peak)
        edges = sorted(set(e for e in edges if e < Y)) + [Y]
        total = sum(integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-12, limit=400)[0]
                    for a, b in zip(edges, edges[1:]))
        for _ in range(60):
            piece = integrate.quad(integrand, Y, 2 * Y, epsabs=0.0, epsrel=1e-12, limit=400)[0]
            total += piece
            Y *= 2
            if not np.isfinite(total):
                return math.inf
            if abs(piece) <= MGF_RTOL * abs(total) and expo(Y) - e_max < -30.0:
                break
        else:
            return math.inf
        if total <= 0:
            return 0.0
        log_i = e_max + math.log(total)
        return float(np.logaddexp(0.0, log_i))

    def _fill(self, ks):
        missing = [k for k in ks if k not in self._table]
        if missing:
            vals = {k: self.exact(self._node(k)) for k in missing}
            with self._lock:
                self._table.update(vals)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.radius_hint == 0:
            return np.where(u > 0, np.inf, 0.0)
        flat = u.ravel()
        out = np.empty_like(flat)
        small = flat < self.u_small
        us = flat[small]
        c4 = self.m4 / 24.0 - self.variance ** 2 / 8.0
        out[small] = 0.5 * self.variance * us ** 2 + c4 * us ** 4
        big = ~small
        if big.any():
            t = np.log(flat[big]) / self.h
            k0 = np.floor(t).astype(int)
            self._fill(sorted(set(np.concatenate([k0 - 1, k0, k0 + 1, k0 + 2]).tolist())))
            nodes = np.stack([np.array([self._table[k] for k in (k0 + j)]) for j in (-1, 0, 1, 2)])
            frac = t - k0
            with np.errstate(divide="ignore", invalid="ignore"):
                lv = np.log(nodes)
                # Lagrange weights for nodes at -1, 0, 1, 2
                w = np.stack([
                    -frac * (frac - 1) * (frac - 2) / 6.0,
                    (frac + 1) * (frac - 1) * (frac - 2) / 2.0,
                    -(frac + 1) * frac * (frac - 2) / 2.0,
                    (frac + 1) * frac * (frac - 1) / 6.0,
                ])
                cubic = np.exp(np.sum(w * lv, axis=0))
            finite4 = np.all(np.isfinite(nodes), axis=0)
            res = np.where(finite4, cubic, np.inf)
            ub = flat[big]
            R = self.radius_hint
            near = np.zeros(ub.shape, dtype=bool)
            if math.isfinite(R) and R > 0:
                # near a finite Kramer radius phi bends sharply; switch coordinates
                near = ub > 0.5 * R
                res[near] = self._near_radius(ub[near])
            # a node past an unknown radius: evaluate exactly
            rough = ~finite4 & np.isfinite(nodes[1]) & ~near
            if rough.any():
                res[rough] = [self._exact_cached(float(v)) for v in ub[rough]]
            out[big] = res
        return out.reshape(u.shape)

    def _near_radius(self, u):
        """Cubic interpolation of ``log phi`` in ``s = -log(1 - u/R)`` for ``u in (R/2, R)``."""
        R = self.radius_hint
        out = np.full(u.shape, np.inf)
        inside = u < R
        if not inside.any():
            return out
        s = -np.log1p(-u[inside] / R)
        t = s / self.h
        k0 = np.floor(t).astype(int)
        keys = sorted(set(np.concatenate([k0 - 1, k0, k0 + 1, k0 + 2]).tolist()))
        missing = [k for k in keys if k not in self._near]
        if missing:
            vals = {k: self.exact(R * -math.expm1(-k * self.h)) for k in missing}
            with self._lock:
                self._near.update(vals)
        nodes = np.stack([np.array([self._near[k] for k in (k0 + j)]) for j in (-1, 0, 1, 2)])
        frac = t - k0
        w = np.stack([
            -frac * (frac - 1) * (frac - 2) / 6.0,
            (frac + 1) * (frac - 1) * (frac - 2) / 2.0,
            -(frac + 1) * frac * (frac - 2) / 2.0,
            (frac + 1) * frac * (frac - 1) / 6.0,
        ])
        with np.errstate(divide="ignore", invalid="ignore"):
            cubic = np.exp(np.sum(w * np.log(nodes), axis=0))
        ok = np.all(np.isfinite(nodes), axis=0)
        vals = np.where(ok, cubic, np.inf)
        if not ok.all():
            # within a few nodes of where quadrature stops converging
            sub = u[inside]
            vals[~ok] = [self._exact_cached(float(v)) for v in sub[~ok]]
        out[inside] = vals
        return out

    def _exact_cached(self, u):
        val = self._direct.get(u)
        if val is None:
            val = self.exact(u)
            with self._lock:
                self._direct[u] = val
        return val


def _gmr_radius(spec):
    if spec is None or math.isinf(spec.m):
        return math.inf
    if spec.m > 1 or (spec.m == 1 and spec.r > 0):
        return math.inf
    if spec.m == 1 and spec.r == 0:
        return spec.C1
    return 0.0


# --------------------------------------------------------------------------
# chi and its Legendre transform
# --------------------------------------------------------------------------

def _n_schedule(cap=CHI_N_CAP):
    lin = np.arange(1, min(CHI_LINEAR_N, cap) + 1)
    if cap <= CHI_LINEAR_N:
        return lin
    k = math.ceil(math.log(cap / CHI_LINEAR_N) / math.log(CHI_GEOM_FACTOR))
    geo = np.ceil(CHI_LINEAR_N * CHI_GEOM_FACTOR ** np.arange(1, k + 1))
    geo = np.unique(np.minimum(geo, cap)).astype(np.int64)
    return np.concatenate([lin, geo[geo > CHI_LINEAR_N]])


_SCHEDULE = _n_schedule()


def chi(model, lam, chunk=64):
    """``chi(lam) = sup_n n phi(lam / sqrt n)`` (vectorised).

    ``n`` is scanned over 1..64 and then geometrically (factor 1.05) up to
    1e9; a lambda stops once 50 consecutive terms fail to improve on the
    running maximum.  The ``n -> inf`` limit ``variance lam^2 / 2`` always
    enters the supremum.  ``inf`` whenever ``phi(lam)`` itself is infinite.
    """
    lam = np.abs(np.asarray(lam, dtype=float))
    shape = lam.shape
    lam = lam.ravel()
    best = np.zeros_like(lam)
    stall = np.zeros(lam.shape, dtype=int)
    active = lam > 0
    last = np.zeros_like(lam)
    for start in range(0, _SCHEDULE.size, chunk):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ns = _SCHEDULE[start:start + chunk].astype(float)
        vals = ns[:, None] * model.phi(lam[idx][None, :] / np.sqrt(ns)[:, None])
        b, s = best[idx], stall[idx]
        for row in vals:
            up = row > b
            b = np.where(up, row, b)
            s = np.where(up, 0, s + 1)
        best[idx], stall[idx] = b, s
        last[idx] = vals[-1]
        active[idx] = (s < CHI_STALL) & np.isfinite(b)
    limit = 0.5 * model.variance * lam * lam
    runaway = active & (last > limit * (1 + 1e-9))
    if runaway.any():
        warnings.warn("chi: n-scan reached the cap while still increasing", RuntimeWarning)
    out = np.maximum(best, limit)
    return out.reshape(shape)


def chi_star(model, x, return_argmax=False):
    """Legendre transform ``sup_lam (lam x - chi(lam))`` for ``x >= 0``.

    Since ``chi(lam) >= variance lam^2 / 2`` the maximiser lies in
    ``[0, 2x / variance]``; the concave objective is maximised there by
    golden-section search.  Returns 0 when the Kramer condition fails.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("chi_star is defined for x >= 0")
    shape = x.shape
    xf = x.ravel()
    if model.radius == 0:
        # Kramer condition fails: exp(-chi*) degenerates to 1
        zero = np.zeros_like(xf)
        return (zero.reshape(shape), zero.reshape(shape)) if return_argmax else zero.reshape(shape)
    hi = 2.0 * xf / model.variance
    if math.isfinite(model.radius) and model.radius > 0:
        hi = np.minimum(hi, model.radius)

    def neg(lam):
        with np.errstate(invalid="ignore"):
            v = chi(model, lam) - lam * xf
        return np.where(np.isnan(v), np.inf, v)

    lam_opt, fmin = golden_minimize(neg, np.zeros_like(xf), hi, xtol=LEGENDRE_XTOL)
    val = np.maximum(-fmin, 0.0)
    val = np.where(xf == 0, 0.0, val)
    if return_argmax:
        return val.reshape(shape), lam_opt.reshape(shape)
    return val.reshape(shape)


# --------------------------------------------------------------------------
# W, Q
# --------------------------------------------------------------------------

def w_operator(T, x):
    """``W[T](x) = min(1, 4 inf_z [exp(-x^2 / (8 z^2)) + E xi^2 1{|xi| > z}])``.

    Only ``z in [x/80, x]`` can matter: below, the exponential term is 0 in
    double precision and the moment term only grows; above, the bracket
    exceeds 1/4.  The infimum is located on a 64-point log grid and refined by
    golden-section search on ``log z``.  Step tails are minimised exactly over
    their jump points.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("w_operator is defined for x >= 0")
    shape = x.shape
    xf = x.ravel()
    out = np.ones_like(xf)
    pos = xf > 0
    if not pos.any():
        return out.reshape(shape)
    y = xf[pos]
    step = as_step(T)
    if step is not None:
        inf_val = _w_inf_step(step, y)
    else:
        inf_val = _w_inf_continuous(T, y)
    if np.any(np.isnan(inf_val)):
        raise NumericalError("W objective evaluated to NaN", {"x": y[np.isnan(inf_val)][:5].tolist()})
    out[pos] = np.minimum(1.0, 4.0 * inf_val)
    return out.reshape(shape)


def _w_objective(T, y, logz):
    z = np.exp(logz)
    return np.exp(-(y * y) / (8.0 * z * z)) + T.truncated_second_moment(z)


def _w_inf_continuous(T, y):
    ulo = np.log(y * W_ZMIN_FACTOR)
    uhi = np.log(y)
    grid = ulo[:, None] + (uhi - ulo)[:, None] * np.linspace(0.0, 1.0, W_COARSE)[None, :]
    fg = _w_objective(T, y[:, None], grid)
    k = np.argmin(fg, axis=1)
    rows = np.arange(y.size)
    a = grid[rows, np.maximum(k - 1, 0)]
    b = grid[rows, np.minimum(k + 1, W_COARSE - 1)]
    _, fmin = golden_minimize(lambda u: _w_objective(T, y, u), a, b, xtol=W_XTOL)
    return np.minimum(fmin, fg[rows, k])


def _w_inf_step(step, y):
    jumps = step.x[1:][step.mass[1:] > 0]
    m2 = step.truncated_second_moment(jumps)
    out = np.empty_like(y)
    for i, yi in enumerate(y):
        lo = np.searchsorted(jumps, yi * W_ZMIN_FACTOR, side="left")
        hi = np.searchsorted(jumps, yi, side="right")
        j0 = max(lo - 1, 0)
        zs = jumps[j0:hi]
        best = step.second_moment  # z -> 0 limit
        if zs.size:
            f = np.exp(-(yi * yi) / (8.0 * zs * zs)) + m2[j0:hi]
            best = min(best, float(f.min()))
        out[i] = best
    return out


def chebyshev_bound(x, variance=1.0):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.minimum(1.0, np.where(x > 0, variance / (x * x), np.inf))


def q_operator(T, model, x):
    """``Q(x) = min(W[T](x), exp(-chi*(x)))``, further capped by Chebyshev.

    Returns ``(values, branch)`` where ``branch`` names the winning term
    (ties resolved in the order chi-star, W, chebyshev).
    """
    x = np.asarray(x, dtype=float)
    w = w_operator(T, x)
    c = np.exp(-chi_star(model, x))
    cheb = chebyshev_bound(x, T.second_moment)
    stacked = np.stack([c, w, cheb])
    k = np.argmin(stacked, axis=0)
    vals = np.clip(np.min(stacked, axis=0), 0.0, 1.0)
    return vals, np.asarray(BRANCHES, dtype=object)[k]


# --------------------------------------------------------------------------
# random index
# --------------------------------------------------------------------------

@dataclass
class BoundCurve:
    x: np.ndarray
    values: np.ndarray
    branch: np.ndarray
    dominant_n: np.ndarray
    config: dict = field(default_factory=dict)

    CSV_COLUMNS = ("x", "bound", "branch", "dominant_n")

    def rows(self):
        for x, v, b, n in zip(self.x, self.values, self.branch, self.dominant_n):
            yield (repr(float(x)), repr(float(v)), str(b), str(int(n)))

    def to_csv(self, path=None, header_lines=()):
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        w.writerows(self.rows())
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_dict(self):
        return {
            "x": [float(v) for v in self.x],
            "bound": [float(v) for v in self.values],
            "branch": [str(b) for b in self.branch],
            "dominant_n": [int(n) for n in self.dominant_n],
            "config": self.config,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def random_sum_bound(T, model, law, x, sigma=None, eps_tail=1e-12, details=False,
                     chebyshev_cap=True):
    """Certified upper bound on ``T(S, x)`` for ``S = sum_{i<=eta} xi_i / (sigma sqrt A)``.

    Evaluates ``sum_n q_n Q(sigma x sqrt(A / n))`` over ``n <= n*`` where
    ``P(eta > n*) < eps_tail`` and adds that remaining index mass (each
    omitted ``Q`` is at most 1).  With ``chebyshev_cap`` the result is also
    capped by ``min(1, x^-2)`` (S has unit variance when eta is independent of
    the summands).  With ``details`` returns a :class:`BoundCurve`.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("x must be non-negative")
    if sigma is None:
        sigma = math.sqrt(T.second_moment)
    n, q, rem = law.series(eps_tail)
    keep = q > 0
    n, q = n[keep], q[keep]
    A = law.mean
    xf = x.ravel()
    scale = np.sqrt(A / n.astype(float))
    y = sigma * xf[:, None] * scale[None, :]
    uy, inv = np.unique(y.ravel(), return_inverse=True)
    qv, br = q_operator(T, model, uy)
    qmat = qv[inv].reshape(y.shape)
    terms = q[None, :] * qmat
    total = terms.sum(axis=1) + rem
    dom = np.argmax(terms, axis=1)
    branch = br[inv].reshape(y.shape)[np.arange(xf.size), dom]
    if chebyshev_cap:
        cap = chebyshev_bound(xf)
        branch = np.where(cap < total, "chebyshev", branch)
        total = np.minimum(total, cap)
    values = np.clip(total, 0.0, 1.0).reshape(x.shape)
    if not details:
        return values
    return BoundCurve(
        x=xf.copy(), values=values.ravel(), branch=np.asarray(branch, dtype=object),
        dominant_n=n[dom],
        config={"law": law.to_dict(), "eps_tail": eps_tail, "sigma": sigma,
                "remainder_mass": rem, "n_terms": int(n.size)},
    )


def bound_curve(summand, law, x_grid, eps_tail=1e-12):
    """:class:`BoundCurve` for a summand object (``Normal`` or ``GmrSpec``)."""
    T = summand.tail()
    model = summand.cumulant()
    curve = random_sum_bound(T, model, law, x_grid, eps_tail=eps_tail, details=True)
    # the tail of S is non-increasing, so a running minimum along x stays a bound
    order = np.argsort(curve.x, kind="stable")
    vals = curve.values.copy()
    vals[order] = np.minimum.accumulate(vals[order])
    curve.values = vals
    curve.config["summand"] = summand.to_dict()
    return curve


# --------------------------------------------------------------------------
# closed forms and diagnostics
# --------------------------------------------------------------------------

def dominant_index(law, mlexp, x, C=1.0, C2=math.e):
    """Index n of the largest term ``log q_n - C y^M log^L(C2 + y)``, ``y = x sqrt(A/n)``.

    Ties go to the smaller n.
    """
    if not isinstance(law, (Geometric, ShiftedPoisson)):
        raise DomainError("dominant_index supports Geometric and ShiftedPoisson laws")
    A = law.mean
    M, L = mlexp.M, mlexp.L
    mode = 1 if isinstance(law, Geometric) else int(math.floor(A - 1)) + 1
    best_val, best_n = -math.inf, 1
    start, block = 1, 4096
    while True:
        n = np.arange(start, start + block, dtype=float)
        logq = law.logpmf(n)
        y = x * np.sqrt(A / n)
        term = logq - C * y ** M * np.log(C2 + y) ** L
        k = int(np.argmax(term))
        if term[k] > best_val:
            best_val, best_n = float(term[k]), int(n[k])
        if n[-1] > mode and logq[-1] < best_val:
            return best_n
        start += block
        block *= 2


def _closed_form(x, C, Ccap, x_power, log_power):
    x = np.asarray(x, dtype=float)
    if np.any(x < 2):
        raise DomainError("closed-form bounds are stated for x >= 2")
    return np.minimum(1.0, Ccap * np.exp(-C * x ** x_power * np.log(x) ** log_power))


def closed_form_geometric(mlexp, x, C=1.0, Ccap=1.0):
    """``min(1, Ccap exp(-C x^{2M/(M+2)} (log x)^{2L/(M+2)}))``."""
    return _closed_form(x, C, Ccap, mlexp.x_power, mlexp.geometric_log_power)


def closed_form_poisson(mlexp, x, C=1.0, Ccap=1.0):
    """``min(1, Ccap exp(-C x^{2M/(M+2)} (log x)^{(2L+M)/(M+2)}))``."""
    return _closed_form(x, C, Ccap, mlexp.x_power, mlexp.poisson_log_power)


@dataclass(frozen=True)
class StoppingExponents:
    """Tail exponents ``(q, w)`` of a sum stopped at a G(a, b) stopping time.

    ``(a, b)`` are the exponents of the index tail and ``(m, r)`` those of
    the summands, so that ``1/q = 1 + 1/(2a) + 1/m``.
    """

    q: float
    w: float
    a: float
    b: float
    m: float
    r: float

    def moment_curve(self, p):
        """``p^(1/q) (log p)^(-w/q)``."""
        p = np.asarray(p, dtype=float)
        return p ** (1.0 / self.q) * np.log(p) ** (-self.w / self.q)


def stopping_exponents(a, b, m, r):
    """``q = 2am / (2am + 2a + m)``, ``w = (2arm + mb + 2am) / (2am + 2a + m)``.

    ``m = inf`` (bounded summands) is taken as the limit.
    """
    if not (a > 0 and m > 0):
        raise DomainError("a and m must be positive")
    if math.isinf(m):
        if math.isinf(a):
            return StoppingExponents(1.0, 1.0 + r, a, b, m, r)
        d = 2 * a + 1
        return StoppingExponents(2 * a / d, (2 * a * r + b + 2 * a) / d, a, b, m, r)
    if math.isinf(a):
        d = 2 * m + 2
        return StoppingExponents(2 * m / d, (2 * r * m + 2 * m) / d, a, b, m, r)
    d = 2 * a * m + 2 * a + m
    return StoppingExponents(2 * a * m / d, (2 * a * r * m + m * b + 2 * a * m) / d, a, b, m, r)


def moment_growth_comparison(m, p_grid):
    """Reference moment-growth curves (constants 1) for r = 0 summands in G(m, 0):

    ``ours = p^(1/2 + 1/min(m,2)) / sqrt(log p)``,
    ``gine = p^(1 + 1/m) / log p``, ``gut = p^(1 + 1/m) / sqrt(log p)``.
    """
    if not m > 1:
        raise DomainError("comparison is stated for m > 1")
    p = np.asarray(p_grid, dtype=float)
    inv_m = 0.0 if math.isinf(m) else 1.0 / m
    lp = np.log(p)
    return {
        "p": p,
        "ours": p ** (0.5 + 1.0 / min(m, 2.0)) / np.sqrt(lp),
        "gine": p ** (1.0 + inv_m) / lp,
        "gut": p ** (1.0 + inv_m) / np.sqrt(lp),
    }
