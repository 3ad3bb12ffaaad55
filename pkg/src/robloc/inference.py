"""Plug-in asymptotic variance for the fitted location estimate.

The sampling variance decomposes into a residual part, a prediction part,
and a regression-coefficient part coupled through estimated influence
functions; every population expectation is replaced by its empirical
counterpart under the fitted error distribution, the observed-case design
distribution, and the fitted response distribution.  The median has no
differentiable influence function, so its route swaps in a sign-based
influence and densities estimated by a Gaussian kernel.
"""

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import norm

from .errors import DegenerateConstant, SingularA0, ZeroDensity
from .kernels import RhoKernel, psi, psi_prime, rho
from .location import (LocationKind, LocationResult, LocationSpec,
                       evaluate_detailed)

PAIR_CAP = 1_000_000
KDE_CAP = 100_000
Z975 = float(norm.ppf(0.975))


# ---------------------------------------------------------------------------
# kernel density estimation (Silverman rule-of-thumb bandwidth)
# ---------------------------------------------------------------------------

def silverman_bandwidth(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    sd = float(np.std(x, ddof=1)) if n > 1 else 0.0
    q75, q25 = np.percentile(x, [75.0, 25.0])
    iqr = float(q75 - q25)
    spread = min(s for s in (sd, iqr / 1.34) if s > 0) \
        if (sd > 0 or iqr > 0) else 0.0
    if spread <= 0:
        raise ZeroDensity("sample has no spread; no density estimate")
    return 0.9 * spread * n ** (-0.2)


def gaussian_kde_at(sample, points, bandwidth=None):
    """Gaussian KDE of `sample` evaluated at `points` (scalar or array)."""
    sample = np.asarray(sample, dtype=np.float64)
    if bandwidth is None:
        bandwidth = silverman_bandwidth(sample)
    pts = np.atleast_1d(np.asarray(points, dtype=np.float64))
    out = np.empty(pts.size)
    step = max(1, (1 << 18) // max(sample.size, 1))
    for a in range(0, pts.size, step):
        z = (pts[a:a + step, None] - sample[None, :]) / bandwidth
        out[a:a + step] = np.exp(-0.5 * z * z).mean(axis=1)
    out /= np.sqrt(2.0 * np.pi) * bandwidth
    return float(out[0]) if np.ndim(points) == 0 else out


# ---------------------------------------------------------------------------
# influence-function constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IFConstants:
    """Empirical moments feeding the influence functions."""

    a01: float
    a00: float
    e01: float
    e00: float
    d0: float
    b0: np.ndarray
    A0: np.ndarray
    sigma0: float
    alpha01: float
    alpha00: float
    delta: float
    # location-side analogues (NaN when not requested)
    a01_loc: float = float("nan")
    e01_loc: float = float("nan")
    d0_loc: float = float("nan")
    sigma0_loc: float = float("nan")
    mu00: float = float("nan")
    mu01: float = float("nan")


def _require(name, value, tol=1e-8):
    if not np.isfinite(value) or abs(value) < tol:
        raise DegenerateConstant(f"constant {name} = {value!r} is "
                                 "numerically degenerate")


def estimate_if_constants(fit, sample, model, rho0: RhoKernel,
                          rho1: RhoKernel, loc_spec: Optional[LocationSpec]
                          = None, dist=None,
                          loc_result: Optional[LocationResult] = None
                          ) -> IFConstants:
    """Replace the population moments by empirical means over the observed
    cases (regression side) and over the fitted response distribution
    (location side, when an MM location spec is supplied)."""
    if fit.exact_fit:
        raise DegenerateConstant("exact fit leaves no error distribution")
    sigma0 = fit.sigma_hat
    u = fit.residuals_observed
    t1 = (u - fit.alpha_hat) / sigma0
    t0 = (u - fit.alpha_s) / sigma0
    a01 = float(np.mean(psi_prime(rho1, t1)))
    e01 = float(np.mean(psi_prime(rho1, t1) * t1))
    a00 = float(np.mean(psi_prime(rho0, t0)))
    e00 = float(np.mean(psi_prime(rho0, t0) * t0))
    d0 = float(np.mean(psi(rho0, t0) * t0))
    G = model.gradient(sample.x_obs, fit.beta_hat)
    b0 = G.mean(axis=0)
    Gc = G - b0
    A0 = (Gc.T @ Gc) / G.shape[0]
    _require("a01", a01)
    _require("d0", d0)
    eigs = np.linalg.eigvalsh(A0)
    if eigs.min() <= 1e-10 * max(1.0, eigs.max()):
        raise DegenerateConstant("gradient covariance is not positive "
                                 "definite; design carries no information")

    loc = dict()
    if loc_spec is not None:
        if loc_spec.kind is not LocationKind.MM:
            raise ValueError("location-side constants need an MM spec")
        if dist is None:
            raise ValueError("location-side constants need the fitted "
                             "response distribution")
        if loc_result is None:
            loc_result = evaluate_detailed(loc_spec, dist)
        if loc_result.degenerate or not loc_result.scale > 0:
            raise DegenerateConstant("degenerate location scale")
        sL, mu01, mu00 = loc_result.scale, loc_result.value, loc_result.s_stage
        r1, r0 = loc_spec.rho1, loc_spec.rho0
        a01L = dist.expectation(lambda y: psi_prime(r1, (y - mu01) / sL))
        e01L = dist.expectation(
            lambda y: psi_prime(r1, (y - mu01) / sL) * (y - mu01) / sL)
        d0L = dist.expectation(
            lambda y: psi(r0, (y - mu00) / sL) * (y - mu00) / sL)
        _require("a01_loc", a01L)
        _require("d0_loc", d0L)
        loc = dict(a01_loc=a01L, e01_loc=e01L, d0_loc=d0L, sigma0_loc=sL,
                   mu00=mu00, mu01=mu01)
    return IFConstants(a01=a01, a00=a00, e01=e01, e00=e00, d0=d0, b0=b0,
                       A0=A0, sigma0=sigma0, alpha01=fit.alpha_hat,
                       alpha00=fit.alpha_s, delta=getattr(loc_spec, "delta",
                                                          0.5), **loc)


# ---------------------------------------------------------------------------
# influence functions
# ---------------------------------------------------------------------------

def regression_if(constants: IFConstants, fit, model, x_rows, y,
                  rho1: RhoKernel):
    """Coefficient influence at observed points: redescending score times
    the whitened centered gradient.  Rows of `x_rows` pair with `y`."""
    X = np.atleast_2d(np.asarray(x_rows, dtype=np.float64))
    yv = np.atleast_1d(np.asarray(y, dtype=np.float64))
    res = yv - model.predict(X, fit.beta_hat) - constants.alpha01
    score = psi(rho1, res / constants.sigma0)
    Gc = model.gradient(X, fit.beta_hat) - constants.b0
    try:
        white = np.linalg.solve(constants.A0, Gc.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularA0(str(exc)) from None
    out = (constants.sigma0 / constants.a01) * score[:, None] * white
    return out[0] if np.ndim(y) == 0 else out


def location_if(constants: IFConstants, y, loc_spec: LocationSpec):
    """Influence of the robust location functional at the fitted response
    distribution; bounded by construction."""
    c = constants
    _require("a01_loc", c.a01_loc)
    _require("d0_loc", c.d0_loc)
    t1 = (np.asarray(y, dtype=np.float64) - c.mu01) / c.sigma0_loc
    t0 = (np.asarray(y, dtype=np.float64) - c.mu00) / c.sigma0_loc
    first = (c.sigma0_loc / c.a01_loc) * psi(loc_spec.rho1, t1)
    second = (c.e01_loc * c.sigma0_loc / (c.a01_loc * c.d0_loc)) * \
        (rho(loc_spec.rho0, t0) - loc_spec.delta)
    return first - second


def location_if_prime(constants: IFConstants, y, loc_spec: LocationSpec):
    """Analytic derivative of `location_if` in y."""
    c = constants
    t1 = (np.asarray(y, dtype=np.float64) - c.mu01) / c.sigma0_loc
    t0 = (np.asarray(y, dtype=np.float64) - c.mu00) / c.sigma0_loc
    return (psi_prime(loc_spec.rho1, t1) / c.a01_loc -
            (c.e01_loc / (c.a01_loc * c.d0_loc)) * psi(loc_spec.rho0, t0))


def median_if(f0_at_mu: float, mu0: float, y):
    """Sign-based influence of the median: sign(y - mu0) / (2 f0(mu0))."""
    if not f0_at_mu > 0:
        raise ZeroDensity("density at the median must be positive")
    return np.sign(np.asarray(y, dtype=np.float64) - mu0) / (2.0 * f0_at_mu)


# ---------------------------------------------------------------------------
# the variance plug-in
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VarianceEstimate:
    tau_sq: float
    se: float
    ci_low: float
    ci_high: float
    eta_hat: float
    c_hat: np.ndarray
    components: dict = field(default_factory=dict)
    mu_hat: float = float("nan")
    subsampled: bool = False


def _pair_matrix(func, u_obs, g_all, row_idx, col_idx):
    """func evaluated at u_obs[row] + g_all[col] on an index grid."""
    return func(u_obs[row_idx][:, None] + g_all[col_idx][None, :])


def estimate_tau_sq(spec: LocationSpec, fit, sample, model, dist,
                    rho1_reg: RhoKernel, seed: int = 0,
                    loc_result: Optional[LocationResult] = None,
                    constants: Optional[IFConstants] = None,
                    rho0_reg: Optional[RhoKernel] = None,
                    pair_cap: int = PAIR_CAP) -> VarianceEstimate:
    """Plug-in variance of the location estimate and a 95% normal CI.

    The double means over (residual, prediction) pairs are exact up to
    `pair_cap` pairs and seeded uniform subsamples beyond it.
    """
    n, m = sample.n, sample.m
    eta = m / n
    obs = sample.a
    u_obs = fit.residuals_observed
    g_all = model.predict(sample.x, fit.beta_hat)
    grad_all = model.gradient(sample.x, fit.beta_hat)
    if rho0_reg is None:
        rho0_reg = RhoKernel(k=1.57)

    if constants is None:
        want_loc = spec.kind is LocationKind.MM
        constants = estimate_if_constants(
            fit, sample, model, rho0_reg, rho1_reg,
            loc_spec=spec if want_loc else None,
            dist=dist if want_loc else None, loc_result=loc_result)

    if spec.kind is LocationKind.MM:
        if loc_result is None:
            mu_hat = constants.mu01
        else:
            mu_hat = loc_result.value

        def IL(y):
            return location_if(constants, y, spec)

        def ILp(y):
            return location_if_prime(constants, y, spec)
        c_hat = None
    elif spec.kind is LocationKind.MEDIAN:
        mu_hat = dist.quantile(0.5) if loc_result is None else loc_result.value
        f0 = gaussian_kde_at(dist.sample(KDE_CAP, seed=seed), mu_hat)
        if not f0 > 0:
            raise ZeroDensity("estimated density at the median is zero")
        k0_at = gaussian_kde_at(u_obs, mu_hat - g_all)

        def IL(y):
            return median_if(f0, mu_hat, y)
        ILp = None
        b0_obs = grad_all[obs].mean(axis=0)
        c_hat = (m / (n * n * eta * f0)) * \
            (k0_at[:, None] * (grad_all - b0_obs)).sum(axis=0)
    elif spec.kind is LocationKind.MEAN:
        mu_hat = dist.mean() if loc_result is None else loc_result.value

        def IL(y):
            return np.asarray(y, dtype=np.float64) - mu_hat

        def ILp(y):
            return np.ones_like(np.asarray(y, dtype=np.float64))
        c_hat = None
    else:  # pragma: no cover
        raise ValueError(f"unsupported functional {spec.kind}")

    # pair means; exact below the cap, seeded uniform subsample above
    rng = np.random.default_rng(seed)
    subsampled = n * m > pair_cap
    if subsampled:
        warnings.warn("pair sums subsampled for the variance plug-in",
                      stacklevel=2)
        cols = np.sort(rng.choice(n, size=max(1, pair_cap // m),
                                  replace=False))
        rows = np.sort(rng.choice(m, size=max(1, pair_cap // n),
                                  replace=False))
    else:
        cols = np.arange(n)
        rows = np.arange(m)

    M_e = _pair_matrix(IL, u_obs, g_all, np.arange(m), cols)
    e_obs = M_e.mean(axis=1)
    M_f = _pair_matrix(IL, u_obs, g_all, rows, np.arange(n))
    f_all = eta * M_f.mean(axis=0)

    if c_hat is None:
        W = _pair_matrix(ILp, u_obs, g_all, rows, cols)
        scale_rows = m / rows.size
        scale_cols = n / cols.size
        col_term = (W.sum(axis=0) * scale_rows) @ grad_all[cols] * scale_cols
        row_term = (W.sum(axis=1) * scale_cols) @ grad_all[obs][rows] \
            * scale_rows
        c_hat = (col_term - row_term) / (n * n)

    ir = regression_if(constants, fit, model, sample.x_obs, sample.y_obs,
                       rho1_reg) / eta
    reg_term = np.zeros(n)
    reg_term[obs] = ir @ c_hat
    e_full = np.zeros(n)
    e_full[obs] = e_obs
    total = e_full + f_all + reg_term
    tau_sq = float(np.mean(total ** 2) / eta ** 2)
    se = float(np.sqrt(tau_sq / n))
    components = {
        "e": float(np.mean(e_full ** 2) / eta ** 2),
        "f": float(np.mean(f_all ** 2) / eta ** 2),
        "regression": float(np.mean(reg_term ** 2) / eta ** 2),
    }
    return VarianceEstimate(
        tau_sq=tau_sq, se=se, ci_low=float(mu_hat - Z975 * se),
        ci_high=float(mu_hat + Z975 * se), eta_hat=eta,
        c_hat=np.asarray(c_hat, dtype=np.float64), components=components,
        mu_hat=float(mu_hat), subsampled=subsampled)
