"""Location functionals evaluated on a fitted response distribution.

Three kinds: the mean, the (lower) median, and a two-stage robust location
with a scale stage (minimum M-scale over candidate centers, found by a grid
scan plus golden-section on the profiled scale) followed by a reweighted-
mean descent of the efficient loss at that fixed scale.  All three are
affine equivariant at the algorithm level: every tolerance is relative to
the data spread or the fitted scale.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .backend import core
from .errors import EmptyDistribution, NoConvergence
from .kernels import RhoKernel, K_EFF_90, K_EFF_95, K_SCALE_50, bisquare
from .mscale import solve_scale_newton

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class LocationKind(Enum):
    MEAN = "mean"
    MEDIAN = "median"
    MM = "mm"


@dataclass(frozen=True)
class LocationSpec:
    kind: LocationKind
    rho0: Optional[RhoKernel] = None
    rho1: Optional[RhoKernel] = None
    delta: float = 0.5

    def __post_init__(self):
        if self.kind is LocationKind.MM:
            if self.rho0 is None or self.rho1 is None:
                raise ValueError("MM location needs rho0 and rho1 kernels")
            if self.rho1.k < self.rho0.k:
                raise ValueError("rho1 must lie below rho0 pointwise "
                                 "(k1 >= k0 for the bisquare)")
            if not (0.0 < self.delta < 1.0):
                raise ValueError("delta must lie inside (0, 1)")


PRESETS = {
    "mean": LocationSpec(LocationKind.MEAN),
    "median": LocationSpec(LocationKind.MEDIAN),
    "mm90": LocationSpec(LocationKind.MM, bisquare(K_SCALE_50),
                         bisquare(K_EFF_90), 0.5),
    "mm95": LocationSpec(LocationKind.MM, bisquare(K_SCALE_50),
                         bisquare(K_EFF_95), 0.5),
}


def location_preset(name: str) -> LocationSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown location preset {name!r}; "
                         f"choose from {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class LocationResult:
    value: float
    kind: LocationKind
    scale: float = float("nan")        # fitted dispersion (MM only)
    s_stage: float = float("nan")      # scale-stage center (MM only)
    degenerate: bool = False
    converged: bool = True
    iterations: int = 0
    objective_path: tuple = ()


# ---------------------------------------------------------------------------
# weighted finite samples expose the same query surface as the convolution
# ---------------------------------------------------------------------------

class WeightedSample:
    """A finite sample with nonnegative weights summing to one."""

    def __init__(self, values, weights=None):
        v = np.asarray(values, dtype=np.float64).ravel()
        if v.size == 0:
            raise EmptyDistribution("empty sample")
        if not np.all(np.isfinite(v)):
            raise ValueError("sample values must be finite")
        if weights is None:
            w = np.full(v.size, 1.0 / v.size)
        else:
            w = np.asarray(weights, dtype=np.float64).ravel()
            if w.shape != v.shape or np.any(w < 0) or w.sum() <= 0:
                raise ValueError("weights must be nonnegative with a "
                                 "positive sum")
            w = w / w.sum()
        order = np.argsort(v, kind="stable")
        self.values = np.ascontiguousarray(v[order])
        self.weights = np.ascontiguousarray(w[order])
        self._cum = np.cumsum(self.weights)

    def quantile(self, p: float) -> float:
        idx = int(np.searchsorted(self._cum, p - 1e-12, side="left"))
        return float(self.values[min(idx, self.values.size - 1)])

    def mean(self) -> float:
        return float(np.dot(self.weights, self.values))

    def mean_rho(self, mu, s, kernel):
        return core.wsamp_mean_rho(self.values, self.weights, mu, s,
                                   kernel.k)

    def mean_rho_d(self, mu, s, kernel):
        return core.wsamp_mean_rho_d(self.values, self.weights, mu, s,
                                     kernel.k)

    def weight_sums(self, mu, s, kernel):
        return core.wsamp_weight_sums(self.values, self.weights, mu, s,
                                      kernel.k)

    def mass_at(self, t: float) -> float:
        return float(self.weights[self.values == t].sum())


# ---------------------------------------------------------------------------
# the two-stage robust location on any query surface
# ---------------------------------------------------------------------------

def _profiled_scale(view, spec, mu, s_warm, s_floor, eq_tol=1e-10):
    """M-scale of (y - mu) under the view, warm-started Newton.

    The equation-residual tolerance is dimensionless, so the solved scale
    is exactly affine equivariant with the data.
    """

    def hd(s):
        return view.mean_rho_d(mu, s, spec.rho0)

    s0 = s_warm if s_warm > s_floor else s_floor * 1e6
    try:
        s = solve_scale_newton(hd, s0, spec.delta, eq_tol=eq_tol,
                               floor=s_floor)
    except NoConvergence:
        s = _bisect_scale(lambda s: view.mean_rho(mu, s, spec.rho0),
                          s0, spec.delta)
    if s <= s_floor:
        return 0.0
    return s


def _bisect_scale(h, s0, delta, rtol=1e-12):
    lo = hi = s0
    for _ in range(200):
        if h(lo) >= delta:
            break
        lo *= 0.5
    for _ in range(200):
        if h(hi) <= delta:
            break
        hi *= 2.0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if h(mid) > delta:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)


def _scale_stage(view, spec):
    """Minimize the profiled scale over the center: coarse localization on
    [q05, q95], then golden-section to 1e-10 of the bracket width."""
    lo, hi = view.quantile(0.05), view.quantile(0.95)
    med = view.quantile(0.5)
    if view.mass_at(med) >= 1.0 - spec.delta - 1e-12:
        return med, 0.0, True
    spread = hi - lo
    if spread <= 0.0:
        return med, 0.0, True
    s_floor = 1e-13 * spread
    best_mu, best_s = med, np.inf
    warm = spread / 4.0

    def profile(mu):
        nonlocal warm, best_mu, best_s
        s = _profiled_scale(view, spec, mu, warm, s_floor)
        if s > 0.0:
            warm = s
        if s < best_s:
            best_mu, best_s = mu, s
        return s

    grid = np.linspace(lo, hi, 17)
    svals = np.array([profile(mu) for mu in grid])
    i = int(np.argmin(svals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid.size - 1)]
    tol = 1e-10 * spread
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = profile(c), profile(d)
    for _ in range(200):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = profile(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = profile(d)
    if best_s == 0.0:
        return best_mu, 0.0, True
    return best_mu, best_s, False


def _mm_location(view, spec, max_iter=500):
    mu00, sigma, degenerate = _scale_stage(view, spec)
    if degenerate:
        return LocationResult(value=mu00, kind=LocationKind.MM, scale=0.0,
                              s_stage=mu00, degenerate=True)
    mu = mu00
    obj = view.mean_rho(mu, sigma, spec.rho1)
    path = [obj]
    converged = False
    iters = 0
    step_prev = None
    for _ in range(max_iter):
        sw, swy = view.weight_sums(mu, sigma, spec.rho1)
        if sw <= 0.0:
            break
        mu_new = swy / sw
        obj_new = view.mean_rho(mu_new, sigma, spec.rho1)
        step = mu_new - mu
        # Aitken-style jump along the geometric tail, kept only when the
        # efficient loss does not increase
        if step_prev not in (None, 0.0):
            rate = step / step_prev
            if 0.05 < abs(rate) < 0.95:
                mu_ex = mu_new + step * (rate / (1.0 - rate))
                obj_ex = view.mean_rho(mu_ex, sigma, spec.rho1)
                if obj_ex <= obj_new + 1e-15:
                    mu_new, obj_new = mu_ex, obj_ex
                    step = None
        path.append(obj_new)
        iters += 1
        done = abs(mu_new - mu) <= 1e-12 * sigma
        mu, obj, step_prev = mu_new, obj_new, step
        if done:
            converged = True
            break
    return LocationResult(value=float(mu), kind=LocationKind.MM,
                          scale=float(sigma), s_stage=float(mu00),
                          degenerate=False, converged=converged,
                          iterations=iters, objective_path=tuple(path))


# ---------------------------------------------------------------------------
# public surface
# ---------------------------------------------------------------------------

def evaluate_detailed(spec: LocationSpec, dist) -> LocationResult:
    if spec.kind is LocationKind.MEAN:
        return LocationResult(value=dist.mean(), kind=spec.kind)
    if spec.kind is LocationKind.MEDIAN:
        return LocationResult(value=dist.quantile(0.5), kind=spec.kind)
    return _mm_location(dist, spec)


def evaluate(spec: LocationSpec, dist) -> float:
    """Value of the functional on any distribution exposing quantile/mean
    and the robust-loss sweeps (convolution or weighted sample)."""
    return evaluate_detailed(spec, dist).value


def mm_location_on_sample(spec: LocationSpec, values, weights=None) -> float:
    """The robust two-stage location of a weighted finite sample."""
    if spec.kind is not LocationKind.MM:
        raise ValueError("mm_location_on_sample requires an MM spec")
    return _mm_location(WeightedSample(values, weights), spec).value
