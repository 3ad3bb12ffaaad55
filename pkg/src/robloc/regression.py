"""S and MM regression fitted on the observed-response rows only.

The regression function carries no intercept of its own (identification
pushes any intercept into the error distribution); the fits still estimate a
free center alpha alongside beta, and the scale equation is solved on the
alpha-centered residuals.  Residuals handed downstream are y - g(x, beta)
WITHOUT subtracting alpha, so the fitted error distribution keeps the error
center and no symmetry assumption is needed.
"""

import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .backend import core
from .errors import (DegenerateDesign, EmptyObservedSet, NoConvergence,
                     Underdetermined)
from .kernels import RhoKernel
from .mscale import mscale_of, solve_scale_newton


class ModelKind(Enum):
    LINEAR = "linear"
    USER_DIFFERENTIABLE = "user"


@dataclass(frozen=True)
class RegressionModel:
    """Regression function g(x, beta) with its beta-gradient.

    ``predict`` maps an (n, p) design and a (q,) parameter to (n,) values;
    ``gradient`` returns the (n, q) matrix of partials.  ``beta_init`` seeds
    Gauss-Newton steps for non-linear g.
    """

    kind: ModelKind
    q: int
    predict: Callable[[np.ndarray, np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray, np.ndarray], np.ndarray]
    beta_init: Optional[np.ndarray] = None


def linear_model(p: int) -> RegressionModel:
    return RegressionModel(
        kind=ModelKind.LINEAR,
        q=p,
        predict=lambda X, beta: X @ beta,
        gradient=lambda X, beta: X,
    )


def user_model(g, g_dot, q, beta_init=None) -> RegressionModel:
    """Wrap row-wise callables g(x, beta) and g_dot(x, beta)."""

    def predict(X, beta):
        return np.array([g(x, beta) for x in X], dtype=np.float64)

    def gradient(X, beta):
        return np.array([g_dot(x, beta) for x in X], dtype=np.float64)

    return RegressionModel(ModelKind.USER_DIFFERENTIABLE, q, predict,
                           gradient, None if beta_init is None
                           else np.asarray(beta_init, dtype=np.float64))


def check_gradient(model: RegressionModel, X, beta, h=1e-6, tol=1e-5):
    """Compare the supplied gradient with central differences of g."""
    beta = np.asarray(beta, dtype=np.float64)
    G = model.gradient(X, beta)
    for j in range(model.q):
        e = np.zeros_like(beta)
        e[j] = h
        fd = (model.predict(X, beta + e) - model.predict(X, beta - e)) / (2 * h)
        err = np.max(np.abs(G[:, j] - fd))
        if err > tol * max(1.0, np.max(np.abs(fd))):
            raise ValueError(
                f"gradient column {j} disagrees with finite differences "
                f"(max error {err:.3g})")


@dataclass(frozen=True)
class CompleteCaseSample:
    """Covariates for every row, responses where observed.

    ``a[i] = 1`` exactly when ``y[i]`` is present; missing responses are
    stored as NaN.
    """

    x: np.ndarray
    y: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        a = np.asarray(self.a).astype(bool)
        if x.ndim != 2 or y.shape != (x.shape[0],) or a.shape != y.shape:
            raise ValueError("x must be (n, p) with matching y and a")
        if np.any(a & ~np.isfinite(y)):
            raise ValueError("observed responses must be finite")
        y = np.where(a, y, np.nan)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "a", a)

    @classmethod
    def from_responses(cls, x, y):
        """Missingness inferred from NaN responses."""
        y = np.asarray(y, dtype=np.float64)
        return cls(x=x, y=y, a=np.isfinite(y))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def m(self) -> int:
        return int(self.a.sum())

    @property
    def x_obs(self) -> np.ndarray:
        return self.x[self.a]

    @property
    def y_obs(self) -> np.ndarray:
        return self.y[self.a]


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the subset search behind the S stage."""

    n_subsets: int = 500
    n_keep: int = 10
    s_refine_steps: int = 50
    max_iterations: int = 200
    tol: float = 1e-8
    seed: int = 0


@dataclass(frozen=True)
class RegressionFit:
    beta_hat: np.ndarray
    alpha_hat: float
    sigma_hat: float
    residuals_observed: np.ndarray    # y - g(x, beta_hat), NOT alpha-centered
    converged: bool
    iterations: int
    exact_fit: bool
    beta_s: np.ndarray                # scale-stage estimates; the scale
    alpha_s: float                    # equation holds at (beta_s, alpha_s)
    method: str = "mm"
    objective_path: tuple = field(default=())


# ---------------------------------------------------------------------------
# candidate generation
# ---------------------------------------------------------------------------

def _augmented_design(model, X, beta):
    return np.column_stack([model.gradient(X, beta), np.ones(X.shape[0])])


def resampling_candidates(sample: CompleteCaseSample, model: RegressionModel,
                          count: int, rng_seed: int) -> np.ndarray:
    """Random elemental-set starts: each candidate interpolates q+1 observed
    pairs exactly.  Deterministic given the seed; singular subsets are
    skipped and DegenerateDesign is raised if none survives."""
    if count < 1:
        raise ValueError("count must be >= 1")
    d = model.q + 1
    m = sample.m
    if m < d:
        raise Underdetermined(f"{m} observed cases cannot pin {d} parameters")
    rng = np.random.default_rng(rng_seed)
    X, y = sample.x_obs, sample.y_obs
    # random d-subsets via row-wise argsort of uniforms
    subsets = np.argsort(rng.random((count, m)), axis=1)[:, :d]
    if model.kind is ModelKind.LINEAR:
        A = np.concatenate(
            [X[subsets], np.ones((count, d, 1))], axis=2)
        B = y[subsets]
        try:
            xi = np.linalg.solve(A, B[:, :, None])[:, :, 0]
            good = np.all(np.isfinite(xi), axis=1)
        except np.linalg.LinAlgError:
            xi = np.full((count, d), np.nan)
            good = np.zeros(count, dtype=bool)
            for i in range(count):
                try:
                    xi[i] = np.linalg.solve(A[i], B[i])
                    good[i] = np.all(np.isfinite(xi[i]))
                except np.linalg.LinAlgError:
                    pass
        if not good.any():
            raise DegenerateDesign("all candidate subsets were singular")
        return xi[good]
    return _nonlinear_candidates(sample, model, subsets)


def _nonlinear_candidates(sample, model, subsets):
    X, y = sample.x_obs, sample.y_obs
    d = model.q + 1
    beta0 = (model.beta_init if model.beta_init is not None
             else np.zeros(model.q))
    out = []
    for idx in subsets:
        xi = np.append(beta0, 0.0)
        Xs, ys = X[idx], y[idx]
        ok = False
        for _ in range(30):
            r = ys - model.predict(Xs, xi[:-1]) - xi[-1]
            D = _augmented_design(model, Xs, xi[:-1])
            try:
                step, *_ = np.linalg.lstsq(D, r, rcond=None)
            except np.linalg.LinAlgError:
                break
            xi = xi + step
            if not np.all(np.isfinite(xi)):
                break
            if np.max(np.abs(r)) <= 1e-9 * max(1.0, np.max(np.abs(ys))):
                ok = True
                break
        if ok:
            out.append(xi)
    if not out:
        raise DegenerateDesign("no subset admitted an exact interpolation")
    return np.asarray(out)


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def _wls(D, y, w):
    Dw = D * w[:, None]
    try:
        return np.linalg.solve(Dw.T @ D, Dw.T @ y)
    except np.linalg.LinAlgError:
        sw = np.sqrt(w)
        sol, *_ = np.linalg.lstsq(D * sw[:, None], y * sw, rcond=None)
        return sol


def _exact_tol(y_obs):
    return 1e-10 * max(1.0, float(np.max(np.abs(y_obs))))


def _candidate_scales(R, k0, delta, keep):
    """Per-candidate M-scales with threshold pruning: a candidate whose
    mean rho at the current keep-th best scale already exceeds delta has a
    larger scale and is never solved fully."""
    c = R.shape[0]
    head = min(c, max(2 * keep, 20))
    scales = np.full(c, np.inf)
    # ranking only: the kept candidates are re-solved tightly while refining
    rank_rtol = 1e-7
    s_head = np.asarray(core.mscale_batch(R[:head], k0, delta,
                                          rank_rtol, 400))
    s_head[s_head < 0] = np.inf
    scales[:head] = s_head
    if head < c:
        finite = s_head[np.isfinite(s_head)]
        if finite.size >= keep and np.all(finite > 0):
            thr = np.partition(finite, keep - 1)[keep - 1]
            h = np.asarray(core.rho_mean_batch(R[head:], thr, k0))
            surv = np.flatnonzero(h < delta) + head
        else:
            surv = np.arange(head, c)
        if surv.size:
            s_rest = np.asarray(core.mscale_batch(R[surv], k0, delta,
                                                  rank_rtol, 400))
            s_rest[s_rest < 0] = np.inf
            scales[surv] = s_rest
    return scales


def _check_identification(sample, model):
    D = _augmented_design(model, sample.x_obs,
                          np.zeros(model.q) if model.beta_init is None
                          else model.beta_init)
    if np.linalg.matrix_rank(D) < model.q + 1:
        warnings.warn("observed design is numerically rank deficient; "
                      "the regression parameter may not be identified",
                      stacklevel=3)


def _residual_scale(r, rho0, delta, warm):
    """Scale equation solved to |mean rho - delta| <= 1e-12; warm starts
    use the safeguarded fixed point, cold starts plain bisection."""
    if warm is None or not warm > 0:
        return mscale_of(r, rho0, delta)
    a = np.abs(r)
    if np.count_nonzero(a) <= delta * a.size + 1e-9:
        return 0.0
    try:
        return solve_scale_newton(
            lambda s: core.rho_mean_d(r, s, rho0.k), warm, delta,
            eq_tol=1e-12)
    except NoConvergence:
        return mscale_of(r, rho0, delta)


def _s_refine(sample, model, xi, rho0, delta, steps, tol):
    """Local improvement: alternate a scale solve with one reweighted
    least-squares step; the bisquare weights make the attained scale
    nonincreasing, and the best visited pair is kept."""
    X, y = sample.x_obs, sample.y_obs
    linear = model.kind is ModelKind.LINEAR
    D = _augmented_design(model, X, xi[:-1]) if linear else None
    best_s, best_xi = np.inf, xi
    iters = 0
    converged = False
    s = None
    for _ in range(steps):
        if linear:
            r = y - D @ xi
        else:
            r = y - model.predict(X, xi[:-1]) - xi[-1]
        s_prev = s
        s = _residual_scale(r, rho0, delta, s)
        if s < best_s:
            best_s, best_xi = s, xi
        if s == 0.0:
            return 0.0, xi, iters, True
        if s_prev is not None and s_prev - s <= 1e-8 * s:
            converged = True
            break
        w = core.tukey_weight(r / s, rho0.k)
        if w.sum() <= 0:
            break
        if linear:
            xi_new = _wls(D, y, w)
        else:
            D = _augmented_design(model, X, xi[:-1])
            xi_new = xi + _wls(D, r, w)
        if not np.all(np.isfinite(xi_new)):
            break
        moved = np.linalg.norm(xi_new - xi) / max(1.0, np.linalg.norm(xi))
        xi = xi_new
        iters += 1
        if moved < tol:
            converged = True
            break
    if linear:
        r = y - D @ xi
    else:
        r = y - model.predict(X, xi[:-1]) - xi[-1]
    s = _residual_scale(r, rho0, delta, s)
    if s < best_s:
        best_s, best_xi = s, xi
    return best_s, best_xi, iters, converged


def fit_s_regression(sample: CompleteCaseSample, model: RegressionModel,
                     rho0: RhoKernel, delta: float = 0.5,
                     search: SearchConfig = SearchConfig()) -> RegressionFit:
    """Minimize the M-scale of alpha-centered residuals over (beta, alpha)."""
    if sample.m == 0:
        raise EmptyObservedSet("no observed responses")
    if sample.m <= model.q:
        raise Underdetermined(
            f"m={sample.m} observed cases with q={model.q} parameters")
    _check_identification(sample, model)
    X, y = sample.x_obs, sample.y_obs
    cands = resampling_candidates(sample, model, search.n_subsets,
                                  search.seed)
    if model.kind is ModelKind.LINEAR:
        D = np.column_stack([X, np.ones(sample.m)])
        R = y[None, :] - cands @ D.T
    else:
        R = np.stack([y - model.predict(X, xi[:-1]) - xi[-1]
                      for xi in cands])
    scales = _candidate_scales(R, rho0.k, delta, search.n_keep)
    order = np.argsort(scales, kind="stable")[:search.n_keep]

    # two-tier schedule: a few improvement steps for every keeper, the
    # full budget for the best two
    shallow = min(8, search.s_refine_steps)
    stage = []
    for idx in order:
        if not np.isfinite(scales[idx]):
            continue
        stage.append(_s_refine(sample, model, cands[idx], rho0, delta,
                               shallow, search.tol))
        if stage[-1][0] == 0.0:
            break
    if not stage:
        raise DegenerateDesign("subset search produced no finite scale")
    stage.sort(key=lambda t: t[0])
    best = stage[0]
    if best[0] > 0.0 and search.s_refine_steps > shallow:
        for s, xi, iters, conv in stage[:2]:
            ref = _s_refine(sample, model, xi, rho0, delta,
                            search.s_refine_steps - shallow, search.tol)
            if ref[0] < best[0]:
                best = ref
    sigma, xi, iters, conv = best
    if not np.isfinite(sigma):
        raise DegenerateDesign("subset search produced no finite scale")
    beta, alpha = xi[:-1].copy(), float(xi[-1])
    resid = y - model.predict(X, beta)
    exact = sigma <= _exact_tol(y)
    if exact:
        sigma = 0.0
    return RegressionFit(
        beta_hat=beta, alpha_hat=alpha, sigma_hat=float(sigma),
        residuals_observed=resid, converged=bool(conv or exact),
        iterations=iters, exact_fit=exact, beta_s=beta, alpha_s=alpha,
        method="s")


def fit_mm_regression(sample: CompleteCaseSample, model: RegressionModel,
                      rho0: RhoKernel, rho1: RhoKernel, delta: float = 0.5,
                      search: SearchConfig = SearchConfig()) -> RegressionFit:
    """Efficient stage: from the S fit, hold the attained scale fixed and
    descend the rho1 objective by reweighted least squares."""
    if rho1.k < rho0.k:
        raise ValueError("rho1 must lie below rho0 (k1 >= k0 for bisquare)")
    sfit = fit_s_regression(sample, model, rho0, delta, search)
    if sfit.exact_fit:
        return sfit
    X, y = sample.x_obs, sample.y_obs
    sigma = sfit.sigma_hat
    xi = np.append(sfit.beta_s, sfit.alpha_s)
    linear = model.kind is ModelKind.LINEAR
    D = _augmented_design(model, X, xi[:-1]) if linear else None

    def objective(res):
        return float(core.rho_mean(res, sigma, rho1.k))

    r = y - model.predict(X, xi[:-1]) - xi[-1]
    obj = objective(r)
    path = [obj]
    converged = False
    iters = 0
    step_prev = None
    for _ in range(search.max_iterations):
        w = core.tukey_weight(r / sigma, rho1.k)
        if w.sum() <= 0:
            break
        if linear:
            xi_new = _wls(D, y, w)
        else:
            D = _augmented_design(model, X, xi[:-1])
            xi_new = xi + _wls(D, r, w)
        if not np.all(np.isfinite(xi_new)):
            break
        r_new = y - model.predict(X, xi_new[:-1]) - xi_new[-1]
        obj_new = objective(r_new)
        if obj_new > obj + 1e-12:
            # cannot happen for the linear majorized step; guards the
            # Gauss-Newton linearization
            step_ok = False
            for _ in range(20):
                xi_new = 0.5 * (xi_new + xi)
                r_new = y - model.predict(X, xi_new[:-1]) - xi_new[-1]
                obj_new = objective(r_new)
                if obj_new <= obj + 1e-12:
                    step_ok = True
                    break
            if not step_ok:
                break
        step = xi_new - xi
        # guarded geometric extrapolation of the linearly-converging
        # iterates; only accepted when the objective does not increase
        if step_prev is not None:
            den = np.linalg.norm(step_prev)
            rate = np.linalg.norm(step) / den if den > 0 else 1.0
            if 0.05 < rate < 0.95:
                xi_ex = xi_new + step * (rate / (1.0 - rate))
                r_ex = y - model.predict(X, xi_ex[:-1]) - xi_ex[-1]
                obj_ex = objective(r_ex)
                if obj_ex <= obj_new + 1e-12:
                    xi_new, r_new, obj_new = xi_ex, r_ex, obj_ex
                    step = None
        moved = np.linalg.norm(xi_new - xi) / max(1.0, np.linalg.norm(xi))
        xi, r, obj = xi_new, r_new, min(obj_new, obj)
        step_prev = step
        path.append(obj_new)
        iters += 1
        if moved < search.tol:
            converged = True
            break
    beta, alpha = xi[:-1].copy(), float(xi[-1])
    return RegressionFit(
        beta_hat=beta, alpha_hat=alpha, sigma_hat=sigma,
        residuals_observed=y - model.predict(X, beta),
        converged=converged, iterations=iters, exact_fit=False,
        beta_s=sfit.beta_s, alpha_s=sfit.alpha_s, method="mm",
        objective_path=tuple(path))


def fit_least_squares(sample: CompleteCaseSample,
                      model: Optional[RegressionModel] = None) -> RegressionFit:
    """Classical baseline: least squares with a free center on the observed
    rows; same residual convention as the robust fits."""
    if sample.m == 0:
        raise EmptyObservedSet("no observed responses")
    if model is None:
        model = linear_model(sample.p)
    if model.kind is not ModelKind.LINEAR:
        raise ValueError("least-squares baseline supports the linear model")
    if sample.m <= model.q:
        raise Underdetermined(
            f"m={sample.m} observed cases with q={model.q} parameters")
    X, y = sample.x_obs, sample.y_obs
    D = np.column_stack([X, np.ones(sample.m)])
    xi, *_ = np.linalg.lstsq(D, y, rcond=None)
    beta, alpha = xi[:-1], float(xi[-1])
    resid = y - X @ beta
    centered = resid - alpha
    sigma = float(np.sqrt(np.mean(centered ** 2)))
    exact = sigma <= _exact_tol(y)
    return RegressionFit(
        beta_hat=beta, alpha_hat=alpha, sigma_hat=0.0 if exact else sigma,
        residuals_observed=resid, converged=True, iterations=1,
        exact_fit=exact, beta_s=beta.copy(), alpha_s=alpha, method="ls")
