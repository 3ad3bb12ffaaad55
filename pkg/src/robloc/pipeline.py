"""End-to-end estimation: robust fit on the complete cases, the fitted
response distribution, the chosen location functional, and its plug-in
standard error, assembled into a serializable report."""

import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .convolution import build as build_convolution
from .errors import DegenerateConstant, ZeroDensity
from .inference import VarianceEstimate, estimate_tau_sq
from .kernels import K_EFF_85, K_SCALE_50, bisquare
from .location import (LocationKind, LocationSpec, evaluate_detailed,
                       location_preset)
from .regression import (CompleteCaseSample, SearchConfig,
                         fit_least_squares, fit_mm_regression, linear_model)


@dataclass(frozen=True)
class PipelineOptions:
    functional: str = "mm90"
    regression: str = "mm"            # "mm" or "ls"
    reg_k0: float = K_SCALE_50
    reg_k1: float = K_EFF_85
    reg_delta: float = 0.5
    want_se: bool = True
    seed: int = 0
    search: SearchConfig = SearchConfig()


@dataclass(frozen=True)
class LocationEstimate:
    value: float
    functional: str
    se: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    tau_sq: Optional[float] = None
    variance_components: dict = field(default_factory=dict)
    degenerate_scale: bool = False


@dataclass(frozen=True)
class RunReport:
    estimate: LocationEstimate
    n: int
    m: int
    eta_hat: float
    fit: dict
    config: dict
    warnings: tuple = ()

    def to_dict(self) -> dict:
        out = asdict(self)
        return _plain(out)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def table(self) -> str:
        e = self.estimate
        lines = [
            f"functional   {e.functional}",
            f"estimate     {e.value:.6g}",
        ]
        if e.se is not None:
            lines += [f"std error    {e.se:.6g}",
                      f"95% CI       [{e.ci_low:.6g}, {e.ci_high:.6g}]"]
        lines += [f"rows         n={self.n}  observed m={self.m}  "
                  f"eta={self.eta_hat:.4f}"]
        for w in self.warnings:
            lines.append(f"warning      {w}")
        return "\n".join(lines) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def estimate_command(sample: CompleteCaseSample,
                     options: PipelineOptions = PipelineOptions(),
                     dump_convolution: Optional[str] = None) -> RunReport:
    """Run the full pipeline on a sample and return the report."""
    notes = []
    spec = location_preset(options.functional)
    model = linear_model(sample.p)
    rho0 = bisquare(options.reg_k0)
    rho1 = bisquare(options.reg_k1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if options.regression == "ls":
            fit = fit_least_squares(sample, model)
        else:
            fit = fit_mm_regression(sample, model, rho0, rho1,
                                    options.reg_delta, options.search)
        dist = build_convolution(fit, sample, model)
        loc = evaluate_detailed(spec, dist)
        var: Optional[VarianceEstimate] = None
        want_se = options.want_se and not (
            spec.kind is LocationKind.MEAN and options.regression == "ls")
        if want_se and not fit.exact_fit and not loc.degenerate \
                and options.regression == "mm":
            try:
                var = estimate_tau_sq(spec, fit, sample, model, dist,
                                      rho1_reg=rho1, rho0_reg=rho0,
                                      seed=options.seed, loc_result=loc)
            except (DegenerateConstant, ZeroDensity) as exc:
                notes.append(f"no standard error: {exc}")
    for w in caught:
        notes.append(str(w.message))
    if fit.exact_fit:
        notes.append("exact fit: residual scale is zero")
    if loc.degenerate:
        notes.append("degenerate location scale: point-mass estimate")
    if var is not None and var.subsampled:
        notes.append("pair sums subsampled in the variance plug-in")
    if dump_convolution is not None:
        dist.dump_csv(dump_convolution)

    estimate = LocationEstimate(
        value=float(loc.value), functional=options.functional,
        se=None if var is None else var.se,
        ci_low=None if var is None else var.ci_low,
        ci_high=None if var is None else var.ci_high,
        tau_sq=None if var is None else var.tau_sq,
        variance_components={} if var is None else dict(var.components),
        degenerate_scale=loc.degenerate)
    fit_summary = dict(
        method=fit.method,
        beta_hat=[float(b) for b in fit.beta_hat],
        alpha_hat=float(fit.alpha_hat),
        sigma_hat=float(fit.sigma_hat),
        converged=bool(fit.converged),
        iterations=int(fit.iterations),
        exact_fit=bool(fit.exact_fit))
    config = dict(functional=options.functional,
                  regression=options.regression,
                  reg_k0=options.reg_k0, reg_k1=options.reg_k1,
                  reg_delta=options.reg_delta, seed=options.seed,
                  subsets=options.search.n_subsets,
                  keep=options.search.n_keep,
                  refine_steps=options.search.s_refine_steps,
                  tol=options.search.tol,
                  search_seed=options.search.seed)
    return RunReport(estimate=estimate, n=sample.n, m=sample.m,
                     eta_hat=sample.m / sample.n, fit=fit_summary,
                     config=config, warnings=tuple(notes))


def make_pipeline(functional: str = "median", regression: str = "mm",
                  reg_k0: float = K_SCALE_50, reg_k1: float = K_EFF_85,
                  reg_delta: float = 0.5,
                  search: SearchConfig = SearchConfig()):
    """A bare sample -> estimate callable (used by the breakdown lab)."""
    spec = location_preset(functional) if isinstance(functional, str) \
        else functional
    rho0, rho1 = bisquare(reg_k0), bisquare(reg_k1)

    def run(sample: CompleteCaseSample) -> float:
        model = linear_model(sample.p)
        if regression == "ls":
            fit = fit_least_squares(sample, model)
        else:
            fit = fit_mm_regression(sample, model, rho0, rho1, reg_delta,
                                    search)
        dist = build_convolution(fit, sample, model)
        return evaluate_detailed(spec, dist).value

    return run
