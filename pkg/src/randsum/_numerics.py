"""Small numerical helpers: vectorised golden-section search and exact binomial intervals."""
import numpy as np
from scipy import stats

INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def golden_minimize(f, lo, hi, xtol=1e-10, max_iter=200):
    """Minimise ``f`` independently on each bracket ``[lo[i], hi[i]]``.

    ``f`` receives an array of abscissae (one per bracket) and must return an
    array of the same shape.  The search stops once every bracket is narrower
    than ``xtol * (1 + |x|)``.  Returns ``(argmin, fmin)``; ``fmin`` is the best
    value actually evaluated, including the bracket end points.
    """
    a = np.array(lo, dtype=float, copy=True)
    b = np.array(hi, dtype=float, copy=True)
    fa, fb = f(a), f(b)
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if np.all(b - a <= xtol * (1.0 + np.abs(a) + np.abs(b))):
            break
        left = fc <= fd
        # shrink to [a, d] where the left probe is better, else [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        fd_new = np.where(left, fc, fd)
        fc_new = np.where(left, fc, fd)
        c_new = np.where(left, b - INVPHI * (b - a), d)
        d_new = np.where(left, c, a + INVPHI * (b - a))
        probe = np.where(left, c_new, d_new)
        fp = f(probe)
        c = c_new
        d = d_new
        fc = np.where(left, fp, fc_new)
        fd = np.where(left, fd_new, fp)
    cand_x = np.stack([a, b, c, d])
    cand_f = np.stack([fa, fb, fc, fd])
    cand_f = np.where(np.isnan(cand_f), np.inf, cand_f)
    k = np.argmin(cand_f, axis=0)
    cols = np.arange(cand_x.shape[1]) if cand_x.ndim > 1 else None
    if cols is None:
        return cand_x[k], cand_f[k]
    return cand_x[k, cols], cand_f[k, cols]


def clopper_pearson(hits, n, level=0.99):
    """Exact two-sided binomial confidence interval for ``hits`` successes out of ``n``."""
    hits = np.asarray(hits, dtype=float)
    alpha = 1.0 - level
    with np.errstate(invalid="ignore"):
        lo = np.where(hits > 0, stats.beta.ppf(alpha / 2, hits, n - hits + 1), 0.0)
        hi = np.where(hits < n, stats.beta.ppf(1 - alpha / 2, hits + 1, n - hits), 1.0)
    return lo, hi


def normal_sf(x):
    """Standard normal upper tail."""
    return stats.norm.sf(x)
