"""The fitted response distribution: predictions convolved with residuals.

The estimator places mass 1/(n*m) on every sum ``prediction_j + residual_i``
(predictions over all n rows, residuals over the m observed rows).  The
distribution is stored as the two sorted component samples; cdf and quantile
queries run in O(m log n) per call via binary search and never materialize
the n*m points, while an explicit enumeration stays available for testing
and small problems.
"""

from dataclasses import dataclass

import numpy as np

from .backend import core
from .errors import EmptyDistribution, EmptyObservedSet
from .kernels import RhoKernel

MATERIALIZE_CAP = 1_000_000


@dataclass(frozen=True)
class ConvolvedDistribution:
    predictions_sorted: np.ndarray
    residuals_sorted: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.predictions_sorted, dtype=np.float64)
        r = np.ascontiguousarray(self.residuals_sorted, dtype=np.float64)
        if p.size == 0 or r.size == 0:
            raise EmptyDistribution("both component samples must be nonempty")
        object.__setattr__(self, "predictions_sorted", np.sort(p))
        object.__setattr__(self, "residuals_sorted", np.sort(r))

    @property
    def n(self) -> int:
        return self.predictions_sorted.size

    @property
    def m(self) -> int:
        return self.residuals_sorted.size

    @property
    def size(self) -> int:
        return self.n * self.m

    # -- distribution queries -------------------------------------------

    def cdf(self, t: float) -> float:
        """Fraction of the n*m sums that are <= t (right-continuous)."""
        c = core.conv_count_le(self.predictions_sorted,
                               self.residuals_sorted, float(t))
        return c / self.size

    def count_le(self, t: float) -> int:
        return core.conv_count_le(self.predictions_sorted,
                                  self.residuals_sorted, float(t))

    def quantile(self, p: float) -> float:
        """Lower p-quantile: the smallest support point t with cdf(t) >= p.

        Located by bisection on the value axis; the returned value is an
        actual pairwise sum, identical to sorting all n*m sums and indexing.
        """
        if not (0.0 < p < 1.0):
            raise ValueError("p must lie strictly inside (0, 1)")
        nm = self.size
        kth = int(np.ceil(p * nm - 1e-9))
        kth = min(max(kth, 1), nm)
        preds, resids = self.predictions_sorted, self.residuals_sorted
        lo = np.nextafter(preds[0] + resids[0], -np.inf)
        hi = preds[-1] + resids[-1]
        # invariant: count(lo) < kth <= count(hi)
        while True:
            mid = lo + 0.5 * (hi - lo)
            if not (lo < mid < hi):
                break
            if core.conv_count_le(preds, resids, mid) >= kth:
                hi = mid
            else:
                lo = mid
        return float(core.conv_smallest_gt(preds, resids, lo))

    def mean(self) -> float:
        """Exact by linearity: mean prediction plus mean residual."""
        return float(np.mean(self.predictions_sorted) +
                     np.mean(self.residuals_sorted))

    def expectation(self, h) -> float:
        """Mean of h over all n*m sums; h must accept numpy arrays.

        O(n*m) work, evaluated in bounded-memory chunks.
        """
        preds, resids = self.predictions_sorted, self.residuals_sorted
        total = 0.0
        step = max(1, (1 << 18) // self.n)
        for a in range(0, self.m, step):
            block = preds[None, :] + resids[a:a + step, None]
            total += float(np.sum(h(block)))
        return total / self.size

    # -- robust-loss sweeps (used by the location functionals) ----------

    def mean_rho(self, mu: float, s: float, kernel: RhoKernel) -> float:
        return core.conv_mean_rho(self.predictions_sorted,
                                  self.residuals_sorted, mu, s, kernel.k)

    def mean_rho_d(self, mu: float, s: float, kernel: RhoKernel):
        return core.conv_mean_rho_d(self.predictions_sorted,
                                    self.residuals_sorted, mu, s, kernel.k)

    def weight_sums(self, mu: float, s: float, kernel: RhoKernel):
        return core.conv_weight_sums(self.predictions_sorted,
                                     self.residuals_sorted, mu, s, kernel.k)

    def mass_at(self, t: float) -> float:
        le = core.conv_count_le(self.predictions_sorted,
                                self.residuals_sorted, float(t))
        lt = core.conv_count_lt(self.predictions_sorted,
                                self.residuals_sorted, float(t))
        return (le - lt) / self.size

    # -- explicit enumeration -------------------------------------------

    def materialize(self, cap: int = MATERIALIZE_CAP) -> np.ndarray:
        """All n*m sums as a flat array; refuses above `cap` points."""
        if self.size > cap:
            raise ValueError(
                f"{self.size} pairwise sums exceed the materialization "
                f"cap of {cap}")
        return (self.predictions_sorted[None, :] +
                self.residuals_sorted[:, None]).ravel()

    def sample(self, size: int, seed: int = 0) -> np.ndarray:
        """Seeded uniform draw of pairwise sums (with replacement)."""
        if self.size <= size:
            return self.materialize(cap=max(self.size, MATERIALIZE_CAP))
        rng = np.random.default_rng(seed)
        i = rng.integers(0, self.m, size=size)
        j = rng.integers(0, self.n, size=size)
        return self.predictions_sorted[j] + self.residuals_sorted[i]

    def dump_csv(self, path) -> None:
        """Write every pairwise sum to a one-column CSV (testing aid)."""
        values = self.materialize()
        np.savetxt(path, values, fmt="%.17g", header="value", comments="")


def build(fit, sample, model) -> ConvolvedDistribution:
    """Distribution of prediction + residual sums for a fitted model.

    Predictions cover ALL rows (missing responses included); residuals are
    the observed-case residuals carried by the fit, left uncentered so the
    error distribution keeps its own location.
    """
    if sample.m == 0:
        raise EmptyObservedSet("no observed responses")
    preds = model.predict(sample.x, fit.beta_hat)
    return ConvolvedDistribution(np.sort(preds),
                                 np.sort(fit.residuals_observed))
