# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical core.

Same interface as ``robloc._core_py``; see that module for semantics.  The
pairwise-sum routines use the exact predicate fl(p + u) <= t with per-row
binary search, and the rho sweeps restrict evaluation to the non-saturated
window of the bisquare.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs

cnp.import_array()

BACKEND_NAME = "native"


cdef inline double _rho1(double t, double k) noexcept nogil:
    cdef double u = t / k
    cdef double u2 = u * u
    cdef double v
    if u2 >= 1.0:
        return 1.0
    v = 1.0 - u2
    return 1.0 - v * v * v


# ---------------------------------------------------------------------------
# Tukey bisquare family
# ---------------------------------------------------------------------------

def tukey_rho(t, double k):
    cdef double[::1] x = np.ascontiguousarray(t, dtype=np.float64).ravel()
    out = np.empty(x.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = _rho1(x[i], k)
    return out.reshape(np.shape(t))


def tukey_psi(t, double k):
    cdef double[::1] x = np.ascontiguousarray(t, dtype=np.float64).ravel()
    out = np.empty(x.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef double u, v
    for i in range(x.shape[0]):
        u = x[i] / k
        v = 1.0 - u * u
        o[i] = (6.0 / k) * u * v * v if v > 0.0 else 0.0
    return out.reshape(np.shape(t))


def tukey_psi_prime(t, double k):
    cdef double[::1] x = np.ascontiguousarray(t, dtype=np.float64).ravel()
    out = np.empty(x.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef double u2
    for i in range(x.shape[0]):
        u2 = (x[i] / k) * (x[i] / k)
        o[i] = (6.0 / (k * k)) * (1.0 - u2) * (1.0 - 5.0 * u2) if u2 < 1.0 else 0.0
    return out.reshape(np.shape(t))


def tukey_weight(t, double k):
    cdef double[::1] x = np.ascontiguousarray(t, dtype=np.float64).ravel()
    out = np.empty(x.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef double v
    for i in range(x.shape[0]):
        v = 1.0 - (x[i] / k) * (x[i] / k)
        o[i] = (6.0 / (k * k)) * v * v if v > 0.0 else 0.0
    return out.reshape(np.shape(t))


# ---------------------------------------------------------------------------
# M-scale
# ---------------------------------------------------------------------------

cdef double _hmean(double[::1] a, double s, double k) noexcept nogil:
    cdef Py_ssize_t i
    cdef double tot = 0.0
    for i in range(a.shape[0]):
        tot += _rho1(a[i] / s, k)
    return tot / a.shape[0]


def rho_mean(r, double s, double k):
    cdef double[::1] a = np.ascontiguousarray(r, dtype=np.float64)
    return _hmean(a, s, k)


def rho_mean_d(r, double s, double k):
    cdef double[::1] a = np.ascontiguousarray(r, dtype=np.float64)
    cdef Py_ssize_t i, m = a.shape[0]
    cdef double h = 0.0, d = 0.0, t, u, u2, v
    for i in range(m):
        t = a[i] / s
        u = t / k
        u2 = u * u
        if u2 >= 1.0:
            h += 1.0
        else:
            v = 1.0 - u2
            h += 1.0 - v * v * v
            d += (6.0 / k) * u * v * v * t
    return h / m, d / m


def rho_mean_batch(R, double s, double k):
    cdef double[:, ::1] A = np.ascontiguousarray(R, dtype=np.float64)
    out = np.empty(A.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(A.shape[0]):
        o[i] = _hmean(A[i], s, k)
    return out


cdef double _mscale_abs(double[::1] a, double k, double delta,
                        double rtol, int max_iter) noexcept nogil:
    cdef Py_ssize_t i, m = a.shape[0]
    cdef Py_ssize_t nonzero = 0
    cdef double amax = 0.0, amean = 0.0
    for i in range(m):
        if a[i] != 0.0:
            nonzero += 1
        if a[i] > amax:
            amax = a[i]
        amean += a[i]
    amean /= m
    if nonzero <= delta * m + 1e-9:
        return 0.0
    cdef double hi = amax / k
    cdef double lo = amean / k
    if lo <= 0.0 or lo >= hi:
        lo = hi * 1e-3
    cdef int it = 0
    while _hmean(a, lo, k) < delta:
        lo *= 0.5
        it += 1
        if it > 200:
            return -1.0
    it = 0
    while _hmean(a, hi, k) > delta:
        hi *= 2.0
        it += 1
        if it > 200:
            return -1.0
    cdef double mid
    for it in range(max_iter):
        mid = 0.5 * (lo + hi)
        if _hmean(a, mid, k) > delta:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)


def mscale(r, double k, double delta, double rtol=1e-12, int max_iter=400):
    cdef double[::1] a = np.abs(np.ascontiguousarray(r, dtype=np.float64))
    return _mscale_abs(a, k, delta, rtol, max_iter)


def mscale_batch(R, double k, double delta, double rtol=1e-12, int max_iter=400):
    cdef double[:, ::1] A = np.abs(np.ascontiguousarray(R, dtype=np.float64))
    out = np.empty(A.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(A.shape[0]):
        o[i] = _mscale_abs(A[i], k, delta, rtol, max_iter)
    return out


# ---------------------------------------------------------------------------
# Pairwise-sum distribution queries (preds sorted ascending)
# ---------------------------------------------------------------------------

cdef inline Py_ssize_t _first_gt(double[::1] p, double u, double t) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = p.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if p[mid] + u > t:
            hi = mid
        else:
            lo = mid + 1
    return lo


cdef inline Py_ssize_t _first_ge(double[::1] p, double u, double t) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = p.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if p[mid] + u >= t:
            hi = mid
        else:
            lo = mid + 1
    return lo


def conv_count_le(preds, resids, double t):
    cdef double[::1] p = np.ascontiguousarray(preds, dtype=np.float64)
    cdef double[::1] u = np.ascontiguousarray(resids, dtype=np.float64)
    cdef Py_ssize_t i
    cdef long long total = 0
    for i in range(u.shape[0]):
        total += _first_gt(p, u[i], t)
    return total


def conv_count_lt(preds, resids, double t):
    cdef double[::1] p = np.ascontiguousarray(preds, dtype=np.float64)
    cdef double[::1] u = np.ascontiguousarray(resids, dtype=np.float64)
    cdef Py_ssize_t i
    cdef long long total = 0
    for i in range(u.shape[0]):
        total += _first_ge(p, u[i], t)
    return total


def conv_smallest_gt(preds, resids, double t):
    cdef double[::1] p = np.ascontiguousarray(preds, dtype=np.float64)
    cdef double[::1] u = np.ascontiguousarray(resids, dtype=np.float64)
    cdef Py_ssize_t i, j, n = p.shape[0]
    cdef double best = INFINITY, cand
    for i in range(u.shape[0]):
        j = _first_gt(p, u[i], t)
        if j < n:
            cand = p[j] + u[i]
            if cand < best:
                best = cand
    return best


def conv_mean_rho(preds, resids, double mu, double s, double k):
    cdef double[::1] p = np.ascontiguousarray(preds, dtype=np.float64)
    cdef double[::1] u = np.ascontiguousarray(resids, dtype=np.float64)
    cdef Py_ssize_t i, j, j1, j2, n = p.shape[0], m = u.shape[0]
    cdef double ks = s * k
    cdef double total = 0.0, lo_val, hi_val
    for i in range(m):
        lo_val = mu - ks - u[i]
        hi_val = mu + ks - u[i]
        j1 = _first_ge(p, 0.0, lo_val)
        j2 = _first_gt(p, 0.0, hi_val)
        if j1 > 0:
            j1 -= 1
        if j2 < n:
            j2 += 1
        total += <double>(n - (j2 - j1))  # saturated pairs contribute 1.0
        for j in range(j1, j2):
            total += _rho1(((p[j] + u[i]) - mu) / s, k)
    return total / (<double>n * <double>m)


def conv_mean_rho_d(preds, resids, double mu, double s, double k):
    cdef double[::1] p = np.ascontiguousarray(preds, dtype=np.float64)
    cdef double[::1] u = np.ascontiguousarray(resids, dtype=np.float64)
    cdef Py_ssize_t i, j, j1, j2, n = p.shape[0], m = u.shape[0]
    cdef double ks = s * k
    cdef double h = 0.0, d = 0.0, lo_val, hi_val, t, uu, u2, v
    for i in range(m):
        lo_val = mu - ks - u[i]
        hi_val = mu + ks - u[i]
        j1 = _first_ge(p, 0.0, lo_val)
        j2 = _first_gt(p, 0.0, hi_val)
        if j1 > 0:
            j1 -= 1
        if j2 < n:
            j2 += 1
        h += <double>(n - (j2 - j1))  # saturated: rho = 1, psi = 0
        for j in range(j1, j2):
            t = ((p[j] + u[i]) - mu) / s
            uu = t / k
            u2 = uu * uu
            if u2 >= 1.0:
                h += 1.0
            else:
                v = 1.0 - u2
                h += 1.0 - v * v * v
                d += (6.0 / k) * uu * v * v * t
    return h / (<double>n * <double>m), d / (<double>n * <double>m)


def conv_weight_sums(preds, resids, double mu, double s, double k):
    cdef double[::1] p = np.ascontiguousarray(preds, dtype=np.float64)
    cdef double[::1] u = np.ascontiguousarray(resids, dtype=np.float64)
    cdef Py_ssize_t i, j, j1, j2, n = p.shape[0], m = u.shape[0]
    cdef double ks = s * k
    cdef double sw = 0.0, swy = 0.0, y, v, w, lo_val, hi_val
    for i in range(m):
        lo_val = mu - ks - u[i]
        hi_val = mu + ks - u[i]
        j1 = _first_ge(p, 0.0, lo_val)
        j2 = _first_gt(p, 0.0, hi_val)
        if j1 > 0:
            j1 -= 1
        if j2 < n:
            j2 += 1
        for j in range(j1, j2):
            y = p[j] + u[i]
            v = 1.0 - ((y - mu) / ks) * ((y - mu) / ks)
            if v > 0.0:
                w = v * v
                sw += w
                swy += w * y
    return sw, swy


def conv_count_inside(preds, resids, double mu, double s, double k):
    return conv_count_lt(preds, resids, mu + s * k) - \
        conv_count_le(preds, resids, mu - s * k)


# ---------------------------------------------------------------------------
# Weighted finite-sample variants
# ---------------------------------------------------------------------------

def wsamp_mean_rho(y, w, double mu, double s, double k):
    cdef double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] ww = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double tot = 0.0, wtot = 0.0
    for i in range(yy.shape[0]):
        tot += ww[i] * _rho1((yy[i] - mu) / s, k)
        wtot += ww[i]
    return tot / wtot


def wsamp_mean_rho_d(y, w, double mu, double s, double k):
    cdef double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] ww = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double h = 0.0, d = 0.0, wtot = 0.0, t, u, u2, v
    for i in range(yy.shape[0]):
        t = (yy[i] - mu) / s
        u = t / k
        u2 = u * u
        if u2 >= 1.0:
            h += ww[i]
        else:
            v = 1.0 - u2
            h += ww[i] * (1.0 - v * v * v)
            d += ww[i] * (6.0 / k) * u * v * v * t
        wtot += ww[i]
    return h / wtot, d / wtot


def wsamp_weight_sums(y, w, double mu, double s, double k):
    cdef double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] ww = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double sw = 0.0, swy = 0.0, v, wt
    cdef double ks = s * k
    for i in range(yy.shape[0]):
        v = 1.0 - ((yy[i] - mu) / ks) * ((yy[i] - mu) / ks)
        if v > 0.0:
            wt = v * v * ww[i]
            sw += wt
            swy += wt * yy[i]
    return sw, swy
