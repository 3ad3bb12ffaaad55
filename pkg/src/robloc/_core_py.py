"""Pure-numpy implementations of the numerical hot kernels.

Mirrors the interface of the compiled ``_native`` extension; selected as a
fallback by :mod:`robloc.backend` when the extension is unavailable.  All
array arguments are 1-d (or 2-d where noted) contiguous float64.

The pairwise-sum ("convolution") routines treat the distribution placing
mass 1/(n*m) on every float sum ``preds[j] + resids[i]``.  Counting uses the
exact predicate ``fl(p + u) <= t`` so results match brute-force enumeration
bit for bit; float addition is monotone, so the predicate is monotone along
a sorted prediction array and admits binary search.
"""

import numpy as np

BACKEND_NAME = "python"


# ---------------------------------------------------------------------------
# Tukey bisquare family
# ---------------------------------------------------------------------------

def tukey_rho(t, k):
    u2 = np.minimum((np.asarray(t, dtype=np.float64) / k) ** 2, 1.0)
    v = 1.0 - u2
    return 1.0 - v * v * v


def tukey_psi(t, k):
    u = np.asarray(t, dtype=np.float64) / k
    v = np.maximum(1.0 - u * u, 0.0)
    return (6.0 / k) * u * v * v


def tukey_psi_prime(t, k):
    u2 = (np.asarray(t, dtype=np.float64) / k) ** 2
    out = (6.0 / (k * k)) * (1.0 - u2) * (1.0 - 5.0 * u2)
    return np.where(u2 < 1.0, out, 0.0)


def tukey_weight(t, k):
    """psi(t)/t with the removable singularity filled in: 6/k^2 * (1-u^2)^2."""
    u2 = (np.asarray(t, dtype=np.float64) / k) ** 2
    v = np.maximum(1.0 - u2, 0.0)
    return (6.0 / (k * k)) * v * v


def rho_mean(r, s, k):
    """mean of rho(r/s); s > 0."""
    return float(np.mean(tukey_rho(r / s, k)))


def rho_mean_d(r, s, k):
    """(mean rho(r/s), mean psi(r/s)*(r/s)); the second term drives Newton
    steps on the scale equation via d/ds mean rho = -d/s."""
    t = np.asarray(r, dtype=np.float64) / s
    u = t / k
    u2 = u * u
    inside = u2 < 1.0
    v = np.where(inside, 1.0 - u2, 0.0)
    h = float(np.mean(1.0 - v * v * v))
    d = float(np.mean((6.0 / k) * u * v * v * t))
    return h, d


def rho_mean_batch(R, s, k):
    """Row-wise mean of rho(R/s) for a (c, m) matrix; used to prune
    scale candidates (mean rho at a reference scale > delta means the
    row's own M-scale exceeds that reference)."""
    u2 = np.minimum((np.asarray(R, dtype=np.float64) / (s * k)) ** 2, 1.0)
    v = 1.0 - u2
    return np.mean(1.0 - v * v * v, axis=1)


# ---------------------------------------------------------------------------
# M-scale (bisection)
# ---------------------------------------------------------------------------

def mscale(r, k, delta, rtol=1e-12, max_iter=400):
    """Solve mean rho((r/s)) = delta for s by bisection.

    Returns 0.0 when the zero-residual fraction is >= 1 - delta (the
    infimum); returns -1.0 if no bracket can be established.
    """
    a = np.abs(np.asarray(r, dtype=np.float64))
    m = a.size
    nonzero = int(np.count_nonzero(a))
    if nonzero <= delta * m + 1e-9:
        return 0.0
    lo = float(np.quantile(a, 1.0 - delta)) / k
    if lo <= 0.0:
        lo = float(a[a > 0].min()) / (2.0 * k)
    hi = float(a.max()) / k
    if hi <= lo:
        hi = 2.0 * lo
    it = 0
    while rho_mean(a, lo, k) < delta:
        lo *= 0.5
        it += 1
        if it > 200:
            return -1.0
    it = 0
    while rho_mean(a, hi, k) > delta:
        hi *= 2.0
        it += 1
        if it > 200:
            return -1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if rho_mean(a, mid, k) > delta:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)


def mscale_batch(R, k, delta, rtol=1e-12, max_iter=400):
    """Row-wise mscale for a (c, m) residual matrix."""
    A = np.abs(np.asarray(R, dtype=np.float64))
    c, m = A.shape
    out = np.empty(c)
    nonzero = np.count_nonzero(A, axis=1)
    exact = nonzero <= delta * m + 1e-9
    out[exact] = 0.0
    live = np.flatnonzero(~exact)
    if live.size == 0:
        return out
    A = A[live]

    def h(sub, s):
        u2 = np.minimum((sub / s[:, None]) ** 2 / (k * k), 1.0)
        v = 1.0 - u2
        return np.mean(1.0 - v * v * v, axis=1)

    lo = np.quantile(A, 1.0 - delta, axis=1) / k
    bad = lo <= 0.0
    if bad.any():
        mins = np.where(A > 0, A, np.inf).min(axis=1)
        lo[bad] = mins[bad] / (2.0 * k)
    hi = A.max(axis=1) / k
    hi = np.maximum(hi, 2.0 * lo)
    for _ in range(200):
        mask = h(A, lo) < delta
        if not mask.any():
            break
        lo[mask] *= 0.5
    for _ in range(200):
        mask = h(A, hi) > delta
        if not mask.any():
            break
        hi[mask] *= 2.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        up = h(A, mid) > delta
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
        if np.all(hi - lo <= rtol * hi):
            break
    out[live] = 0.5 * (lo + hi)
    return out


# ---------------------------------------------------------------------------
# Pairwise-sum distribution queries
# ---------------------------------------------------------------------------

def _settle(preds, resids, t, idx, strict):
    """Move each index to the first j where preds[j] + resids[i] exceeds t
    (``> t``; or ``>= t`` when strict counting sums < t)."""
    n = preds.size
    while True:
        j = np.minimum(idx, n - 1)
        s = preds[j] + resids
        adv = (idx < n) & (s < t if strict else s <= t)
        jm = np.maximum(idx, 1) - 1
        sm = preds[jm] + resids
        back = (idx > 0) & ~(sm < t if strict else sm <= t)
        if not adv.any() and not back.any():
            return idx
        idx[adv] += 1
        idx[back & ~adv] -= 1


def conv_count_le(preds, resids, t):
    """#{(i, j): fl(preds[j] + resids[i]) <= t}; preds sorted ascending."""
    idx = np.searchsorted(preds, t - resids, side="right")
    idx = _settle(preds, resids, t, idx, strict=False)
    return int(idx.sum())


def conv_count_lt(preds, resids, t):
    idx = np.searchsorted(preds, t - resids, side="left")
    idx = _settle(preds, resids, t, idx, strict=True)
    return int(idx.sum())


def conv_smallest_gt(preds, resids, t):
    """Smallest support value strictly greater than t (+inf when none)."""
    idx = np.searchsorted(preds, t - resids, side="right")
    idx = _settle(preds, resids, t, idx, strict=False)
    keep = idx < preds.size
    if not keep.any():
        return np.inf
    return float(np.min(preds[idx[keep]] + resids[keep]))


_CHUNK = 1 << 18


def _chunks(m, n):
    step = max(1, _CHUNK // max(n, 1))
    for start in range(0, m, step):
        yield start, min(start + step, m)


def conv_mean_rho(preds, resids, mu, s, k):
    """mean over all pairs of rho((preds[j] + resids[i] - mu) / s)."""
    n, m = preds.size, resids.size
    ks = s * k
    total = 0.0
    for a, b in _chunks(m, n):
        y = preds[None, :] + resids[a:b, None]
        u = (y - mu) / ks
        u2 = np.minimum(u * u, 1.0)
        v = 1.0 - u2
        total += float(np.sum(1.0 - v * v * v))
    return total / (n * m)


def conv_mean_rho_d(preds, resids, mu, s, k):
    """(mean rho, mean psi(t)*t) over all pairs, t = (y - mu)/s."""
    n, m = preds.size, resids.size
    h = 0.0
    d = 0.0
    for a, b in _chunks(m, n):
        y = preds[None, :] + resids[a:b, None]
        t = (y - mu) / s
        u = t / k
        u2 = u * u
        v = np.where(u2 < 1.0, 1.0 - u2, 0.0)
        h += float(np.sum(1.0 - v * v * v))
        d += float(np.sum((6.0 / k) * u * v * v * t))
    return h / (n * m), d / (n * m)


def conv_weight_sums(preds, resids, mu, s, k):
    """(sum of w, sum of w*y) over pairs, w = (1 - ((y-mu)/(s k))^2)^2 inside."""
    n, m = preds.size, resids.size
    ks = s * k
    sw = 0.0
    swy = 0.0
    for a, b in _chunks(m, n):
        y = preds[None, :] + resids[a:b, None]
        u = (y - mu) / ks
        v = 1.0 - u * u
        w = np.where(v > 0.0, v * v, 0.0)
        sw += float(w.sum())
        swy += float((w * y).sum())
    return sw, swy


def conv_count_inside(preds, resids, mu, s, k):
    """#pairs with |y - mu| < s*k (the non-saturated region of rho)."""
    lo = conv_count_le(preds, resids, mu - s * k)
    hi = conv_count_lt(preds, resids, mu + s * k)
    return hi - lo


# ---------------------------------------------------------------------------
# Weighted finite-sample variants
# ---------------------------------------------------------------------------

def wsamp_mean_rho(y, w, mu, s, k):
    u2 = np.minimum(((y - mu) / (s * k)) ** 2, 1.0)
    v = 1.0 - u2
    return float(np.dot(w, 1.0 - v * v * v)) / float(w.sum())


def wsamp_mean_rho_d(y, w, mu, s, k):
    t = (np.asarray(y, dtype=np.float64) - mu) / s
    u = t / k
    u2 = u * u
    v = np.where(u2 < 1.0, 1.0 - u2, 0.0)
    wtot = float(w.sum())
    h = float(np.dot(w, 1.0 - v * v * v)) / wtot
    d = float(np.dot(w, (6.0 / k) * u * v * v * t)) / wtot
    return h, d


def wsamp_weight_sums(y, w, mu, s, k):
    u2 = ((y - mu) / (s * k)) ** 2
    v = 1.0 - u2
    ww = np.where(v > 0.0, v * v, 0.0) * w
    return float(ww.sum()), float(np.dot(ww, y))
