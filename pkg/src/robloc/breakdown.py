"""Finite-sample breakdown experiments.

Contamination replaces up to t rows overall with at most s of them among
the observed-response rows; a configuration breaks the estimator when the
estimate escapes a fixed multiple of its clean value at any magnitude of a
growing replacement ladder.  The ladder certifies escape, never
boundedness: staying inside the bound at every rung is evidence, not proof.
"""

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import MeanHasNoUABP
from .location import LocationKind, LocationSpec
from .regression import CompleteCaseSample

DEFAULT_LADDER = (1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8)


class Placement(Enum):
    LEVERAGE_X = "leverage_x"
    OUTLIER_Y = "outlier_y"
    BOTH = "both"


@dataclass(frozen=True)
class ContaminationScheme:
    """Replace at most t rows, at most s of them observed."""

    t: int
    s: int
    magnitudes: Sequence[float] = DEFAULT_LADDER
    placement: Placement = Placement.BOTH
    direction: str = "axis"      # "axis" or "random" leverage direction

    def __post_init__(self):
        if self.s > self.t or self.s < 0 or self.t < 0:
            raise ValueError("need 0 <= s <= t")
        if self.direction not in ("axis", "random"):
            raise ValueError("direction must be 'axis' or 'random'")

    def kappa(self, n: int, m: int) -> float:
        return max(self.t / n, self.s / m if m else 0.0)


def contaminate(sample: CompleteCaseSample, scheme: ContaminationScheme,
                magnitude: float, seed: int) -> CompleteCaseSample:
    """One contaminated copy: s random observed rows get (x, y) replaced,
    t - s random missing rows get x replaced (their response stays
    unobserved).  Indicators never change."""
    rng = np.random.default_rng([seed, scheme.t, scheme.s])
    x = sample.x.copy()
    y = sample.y.copy()
    obs_idx = np.flatnonzero(sample.a)
    mis_idx = np.flatnonzero(~sample.a)
    s_rows = rng.choice(obs_idx, size=min(scheme.s, obs_idx.size),
                        replace=False)
    extra = min(scheme.t - scheme.s, mis_idx.size)
    t_rows = rng.choice(mis_idx, size=extra, replace=False) \
        if extra > 0 else np.empty(0, dtype=int)

    def lever(row_count):
        p = sample.p
        if scheme.direction == "axis":
            out = np.zeros((row_count, p))
            out[:, rng.integers(0, p)] = magnitude
        else:
            d = rng.standard_normal((row_count, p))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            out = magnitude * d
        return out

    if scheme.placement in (Placement.LEVERAGE_X, Placement.BOTH):
        if s_rows.size:
            x[s_rows] = lever(s_rows.size)
        if t_rows.size:
            x[t_rows] = lever(t_rows.size)
    if scheme.placement in (Placement.OUTLIER_Y, Placement.BOTH):
        y[s_rows] = magnitude
    return CompleteCaseSample(x=x, y=y, a=sample.a)


@dataclass(frozen=True)
class FsbpRow:
    t: int
    s: int
    kappa: float
    escaped: bool
    worst_abs: float


@dataclass(frozen=True)
class FsbpReport:
    clean_value: float
    bound: float
    rows: tuple
    smallest_escaping_kappa: Optional[float]
    grid_max_kappa: float

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "s", "kappa", "escaped", "worst_abs_estimate"])
            for r in self.rows:
                w.writerow([r.t, r.s, f"{r.kappa:.6f}", int(r.escaped),
                            f"{r.worst_abs:.6g}"])


def empirical_fsbp(pipeline, base_sample: CompleteCaseSample,
                   schemes: Sequence[ContaminationScheme],
                   seeds: Sequence[int],
                   escape_factor: float = 100.0) -> FsbpReport:
    """Smallest contamination fraction on the grid that drives |estimate|
    past escape_factor times its clean value (estimator failures count as
    escapes).  Deterministic given seeds and grid."""
    clean = float(pipeline(base_sample))
    bound = escape_factor * abs(clean)
    n, m = base_sample.n, base_sample.m
    rows = []
    for scheme in schemes:
        escaped = False
        worst = abs(clean)
        for seed in seeds:
            for mag in scheme.magnitudes:
                try:
                    mu = float(pipeline(contaminate(base_sample, scheme,
                                                    mag, seed)))
                except Exception:
                    escaped = True
                    worst = np.inf
                    break
                worst = max(worst, abs(mu))
                if abs(mu) > bound:
                    escaped = True
                    break
            if escaped:
                break
        rows.append(FsbpRow(scheme.t, scheme.s, scheme.kappa(n, m),
                            escaped, worst))
    escaping = [r.kappa for r in rows if r.escaped]
    return FsbpReport(
        clean_value=clean, bound=bound, rows=tuple(rows),
        smallest_escaping_kappa=min(escaping) if escaping else None,
        grid_max_kappa=max(r.kappa for r in rows) if rows else 0.0)


def scheme_grid(fractions: Sequence[float], n: int, m: int,
                **kwargs) -> list:
    """Schemes hitting the requested contamination fractions on both the
    full sample and the observed subset."""
    out = []
    for f in fractions:
        out.append(ContaminationScheme(t=int(np.floor(f * n)),
                                       s=int(np.floor(f * m)), **kwargs))
    return out


def theorem4_bound(eps1: float, eps2: float) -> float:
    """Lower bound for the pipeline breakdown point given the regression
    breakdown eps1 and the location functional's uniform bound eps2."""
    if not (0.0 <= eps1 <= 0.5 and 0.0 <= eps2 <= 0.5):
        raise ValueError("breakdown inputs must lie in [0, 0.5]")
    return min(eps1, 1.0 - np.sqrt(1.0 - eps2))


def uabp(spec: LocationSpec) -> float:
    """Uniform asymptotic breakdown point of a location functional."""
    if spec.kind is LocationKind.MEDIAN:
        return 0.5
    if spec.kind is LocationKind.MM:
        return min(spec.delta, 1.0 - spec.delta)
    raise MeanHasNoUABP("the mean breaks under any contamination level")


def regression_bdp(delta: float, c_design: float) -> float:
    """Asymptotic breakdown of the scale-minimizing regression on a design
    with hyperplane concentration c_design: min(delta, 1 - delta - c)."""
    return min(delta, 1.0 - delta - c_design)


def design_concentration(x_obs, trials: int = 200, seed: int = 0,
                         tol: float = 1e-9) -> float:
    """Largest fraction of observed rows found on a common affine
    hyperplane by randomized subset probing (reported, not certified)."""
    X = np.asarray(x_obs, dtype=np.float64)
    m, p = X.shape
    if m <= p:
        return 1.0
    rng = np.random.default_rng(seed)
    best = 0
    scale = max(1.0, float(np.abs(X).max()))
    for _ in range(trials):
        idx = rng.choice(m, size=p, replace=False)
        pts = X[idx]
        base = pts[0]
        A = pts[1:] - base
        # normal to the affine hull: least singular vector
        _, _, vt = np.linalg.svd(A, full_matrices=True)
        gamma = vt[-1]
        dist = np.abs((X - base) @ gamma)
        best = max(best, int(np.sum(dist <= tol * scale)))
    return best / m
