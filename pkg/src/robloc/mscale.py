"""M-scale of a residual sample: the dispersion s solving

    mean_i rho((r_i / s)) = delta

for a bounded rho.  The left side is continuous and nonincreasing in s, so
bisection is unconditionally convergent; Newton is not used because the
derivative vanishes once every |r/s| clears the rejection point.
"""

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .backend import core
from .errors import NoConvergence, NonFiniteResidual
from .kernels import RhoKernel


@dataclass(frozen=True)
class ScaleProblem:
    residuals: np.ndarray
    kernel: RhoKernel
    delta: float = 0.5
    tolerance: float = 1e-10   # relative, on s
    max_iterations: int = 400

    def __post_init__(self):
        r = np.asarray(self.residuals, dtype=np.float64)
        if r.size == 0:
            raise ValueError("residual sample is empty")
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie strictly inside (0, 1)")
        if not (self.tolerance > 0 and self.max_iterations > 0):
            raise ValueError("tolerance and max_iterations must be positive")
        object.__setattr__(self, "residuals", r)


class MScaleResult(NamedTuple):
    scale: float
    exact_fit: bool


def solve_m_scale(problem: ScaleProblem) -> MScaleResult:
    """Solve the scale equation; scale 0 with the exact-fit flag when the
    zero-residual fraction is at least 1 - delta (the infimum case)."""
    r = problem.residuals
    if not np.all(np.isfinite(r)):
        raise NonFiniteResidual("residual sample contains non-finite values")
    s = core.mscale(r, problem.kernel.k, problem.delta,
                    problem.tolerance, problem.max_iterations)
    if s < 0.0:
        raise NoConvergence("could not bracket the scale equation root")
    return MScaleResult(float(s), s == 0.0)


def mscale_of(r, kernel: RhoKernel, delta: float, rtol: float = 1e-12) -> float:
    """Bare solver for internal hot paths; no validation, no flag."""
    s = core.mscale(np.asarray(r, dtype=np.float64), kernel.k, delta, rtol, 400)
    if s < 0.0:
        raise NoConvergence("could not bracket the scale equation root")
    return float(s)


def solve_scale_newton(mean_rho_d: Callable[[float], tuple], s0: float,
                       delta: float, eq_tol: float = 5e-13,
                       max_iter: int = 200, floor: float = 0.0) -> float:
    """Solve mean_rho(s) = delta by safeguarded Newton.

    ``mean_rho_d(s)`` returns (h, d) with h = mean rho(r/s) and
    d = mean psi(r/s)(r/s), so h'(s) = -d/s and the Newton step is
    s + s(h - delta)/d.  A bracket is maintained and any step leaving it is
    replaced by bisection; used where the equation is re-solved many times
    with a warm start (refinement sweeps, location profiling).  The
    stand-alone solver above stays on plain bisection.  Falling through
    `floor` means the equation has no positive root down to that level
    (over-concentrated data); the iterate is returned as is.
    """
    lo, hi = 0.0, np.inf
    s = s0
    for _ in range(max_iter):
        h, d = mean_rho_d(s)
        if abs(h - delta) <= eq_tol:
            return s
        if h > delta:
            lo = s
        else:
            hi = s
        if d > 1e-300:
            nxt = s + s * (h - delta) / d
        else:
            nxt = np.nan
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi) if np.isfinite(hi) else s * 2.0
        if nxt == s or nxt <= floor:
            return nxt
        s = nxt
    raise NoConvergence("scale equation solver did not converge")
