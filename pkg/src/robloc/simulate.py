"""Monte Carlo engine: uniform-design linear responses, logistic
missingness, optional replacement contamination of observed rows, and
MSE/efficiency tables for a panel of location estimators.

Replicates draw from counter-derived generator streams keyed by
(master seed, replicate index), so results are identical for any worker
count and replicates can be regenerated independently.
"""

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .convolution import build as build_convolution
from .kernels import K_EFF_85, K_SCALE_50, bisquare
from .location import (LocationSpec, evaluate, location_preset)
from .regression import (CompleteCaseSample, SearchConfig,
                         fit_least_squares, fit_mm_regression, linear_model)


@dataclass(frozen=True)
class Contamination:
    """Replace a fraction of the observed rows by an identical point with
    every covariate at x_star and response y_star; indicators stay 1."""

    fraction: float = 0.10
    x_star: float = 1.0
    y_star: float = 8.0


@dataclass(frozen=True)
class SimScenario:
    n: int = 100
    p: int = 5
    beta: Sequence[float] = (3.0, 3.0, 3.0, 3.0, 3.0)
    missing_slope: float = 0.57
    mu_true: float = 7.5
    replications: int = 1000
    seed: int = 0
    contamination: Optional[Contamination] = None
    search: SearchConfig = SearchConfig()


@dataclass(frozen=True)
class Estimator:
    """A named pipeline: which regression backs the fit and which location
    functional reads the fitted response distribution."""

    name: str
    regression: str            # "ls" or "mm"
    location: LocationSpec
    reg_rho0: object = field(default=bisquare(K_SCALE_50))
    reg_rho1: object = field(default=bisquare(K_EFF_85))
    reg_delta: float = 0.5


def default_estimators() -> list:
    """The standard comparison panel: classical mean on least squares plus
    median and two robust locations on the 85%-efficiency robust fit."""
    return [
        Estimator("MEAN", "ls", location_preset("mean")),
        Estimator("MEDIAN", "mm", location_preset("median")),
        Estimator("MM90", "mm", location_preset("mm90")),
        Estimator("MM95", "mm", location_preset("mm95")),
    ]


def generate_replicate(scenario: SimScenario, index: int
                       ) -> CompleteCaseSample:
    """Deterministic replicate: uniform covariates, standard normal errors,
    logistic missingness on the covariate sum, then contamination of a
    round(fraction * m) subset of the observed rows."""
    rng = np.random.default_rng([scenario.seed, index, 0])
    n, p = scenario.n, scenario.p
    x = rng.random((n, p))
    u = rng.standard_normal(n)
    y = x @ np.asarray(scenario.beta, dtype=np.float64) + u
    eta_lin = scenario.missing_slope * x.sum(axis=1)
    prob = 1.0 / (1.0 + np.exp(-eta_lin))
    a = rng.random(n) < prob
    c = scenario.contamination
    if c is not None:
        rng2 = np.random.default_rng([scenario.seed, index, 1])
        obs_idx = np.flatnonzero(a)
        k = int(round(c.fraction * obs_idx.size))
        if k > 0:
            rows = rng2.choice(obs_idx, size=k, replace=False)
            x[rows] = c.x_star
            y[rows] = c.y_star
    y = np.where(a, y, np.nan)
    return CompleteCaseSample(x=x, y=y, a=a)


def _replicate_estimates(scenario: SimScenario, estimators, index: int):
    """One row of estimates; failures surface as NaN."""
    sample = generate_replicate(scenario, index)
    model = linear_model(scenario.p)
    search = replace(scenario.search,
                     seed=int(np.random.default_rng(
                         [scenario.seed, index, 2]).integers(0, 2**31 - 1)))
    fits = {}
    out = np.full(len(estimators), np.nan)
    for j, est in enumerate(estimators):
        key = (est.regression, est.reg_rho0.k, est.reg_rho1.k, est.reg_delta)
        try:
            if key not in fits:
                if est.regression == "ls":
                    fit = fit_least_squares(sample, model)
                else:
                    fit = fit_mm_regression(sample, model, est.reg_rho0,
                                            est.reg_rho1, est.reg_delta,
                                            search)
                fits[key] = (fit, build_convolution(fit, sample, model))
            fit, dist = fits[key]
            out[j] = evaluate(est.location, dist)
        except Exception:
            out[j] = np.nan
    return out


@dataclass(frozen=True)
class SimReport:
    estimator_names: tuple
    mse: dict
    efficiency: dict
    replications: int
    seed: int
    runtime_seconds: float
    failures: dict
    mu_true: float
    estimates: Optional[np.ndarray] = None   # (replications, estimators)

    def table(self) -> str:
        names = list(self.estimator_names)
        buf = io.StringIO()
        buf.write(f"{'estimator':<10} {'MSE':>10} {'efficiency':>11} "
                  f"{'failures':>9}\n")
        for name in names:
            eff = self.efficiency.get(name)
            eff_s = f"{100 * eff:10.1f}%" if eff is not None else " " * 11
            buf.write(f"{name:<10} {self.mse[name]:>10.5f} {eff_s} "
                      f"{self.failures.get(name, 0):>9d}\n")
        return buf.getvalue()

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["estimator", "mse", "efficiency", "failures",
                        "replications", "seed"])
            for name in self.estimator_names:
                eff = self.efficiency.get(name)
                w.writerow([name, f"{self.mse[name]:.8g}",
                            "" if eff is None else f"{eff:.6f}",
                            self.failures.get(name, 0), self.replications,
                            self.seed])


class _Task:
    """Picklable replicate worker for process pools."""

    def __init__(self, scenario, estimators):
        self.scenario = scenario
        self.estimators = estimators

    def __call__(self, index):
        return _replicate_estimates(self.scenario, self.estimators, index)


def _estimate_matrix(scenario, estimators, workers):
    task = _Task(scenario, estimators)
    indices = range(scenario.replications)
    if workers <= 1:
        rows = [task(i) for i in indices]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(task, indices,
                               chunksize=max(1, scenario.replications //
                                             (8 * workers))))
    return np.vstack(rows)


def run_study(scenario: SimScenario, estimators=None, workers: int = 1,
              keep_estimates: bool = False) -> SimReport:
    """MSE of every estimator against the scenario center, with
    efficiencies relative to MEAN; deterministic for a fixed scenario
    regardless of worker count (replicates merge by index)."""
    if estimators is None:
        estimators = default_estimators()
    t0 = time.perf_counter()
    est = _estimate_matrix(scenario, estimators, workers)
    runtime = time.perf_counter() - t0
    names = tuple(e.name for e in estimators)
    mse, failures = {}, {}
    for j, name in enumerate(names):
        col = est[:, j]
        ok = np.isfinite(col)
        failures[name] = int((~ok).sum())
        mse[name] = float(np.mean((col[ok] - scenario.mu_true) ** 2)) \
            if ok.any() else float("nan")
    efficiency = {}
    if "MEAN" in mse and scenario.contamination is None:
        base = mse["MEAN"]
        efficiency = {name: base / mse[name] for name in names
                      if np.isfinite(mse[name]) and mse[name] > 0}
    return SimReport(estimator_names=names, mse=mse, efficiency=efficiency,
                     replications=scenario.replications, seed=scenario.seed,
                     runtime_seconds=runtime, failures=failures,
                     mu_true=scenario.mu_true,
                     estimates=est if keep_estimates else None)


@dataclass(frozen=True)
class SweepReport:
    """MSE curves over a grid of contamination response values."""

    x_star: float
    y_grid: np.ndarray
    estimator_names: tuple
    mse_curves: dict                  # name -> array over y_grid
    replications: int
    seed: int
    runtime_seconds: float

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["y_star"] + [f"mse_{n}" for n in
                                     self.estimator_names])
            for i, ys in enumerate(self.y_grid):
                w.writerow([f"{ys:.6g}"] +
                           [f"{self.mse_curves[n][i]:.8g}"
                            for n in self.estimator_names])


def contamination_grid(start: float = 8.0, stop: float = 50.0,
                       step: float = 0.2) -> np.ndarray:
    count = int(round((stop - start) / step)) + 1
    return start + step * np.arange(count)


def run_contamination_sweep(scenario: SimScenario, x_star: float,
                            y_grid=None, estimators=None,
                            workers: int = 1) -> SweepReport:
    """Re-run the study at every contamination response on the grid; the
    clean part of each replicate is shared across grid points."""
    if y_grid is None:
        y_grid = contamination_grid()
    if estimators is None:
        estimators = default_estimators()
    names = tuple(e.name for e in estimators)
    curves = {name: np.empty(len(y_grid)) for name in names}
    t0 = time.perf_counter()
    for i, y_star in enumerate(y_grid):
        contaminated = replace(
            scenario, contamination=Contamination(
                fraction=(scenario.contamination.fraction
                          if scenario.contamination else 0.10),
                x_star=x_star, y_star=float(y_star)))
        report = run_study(contaminated, estimators, workers=workers)
        for name in names:
            curves[name][i] = report.mse[name]
    return SweepReport(x_star=x_star, y_grid=np.asarray(y_grid, dtype=float),
                       estimator_names=names, mse_curves=curves,
                       replications=scenario.replications,
                       seed=scenario.seed,
                       runtime_seconds=time.perf_counter() - t0)
