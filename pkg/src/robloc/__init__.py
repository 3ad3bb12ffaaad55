"""Robust location estimation when responses are missing at random.

The pipeline: a high-breakdown regression fitted on the complete cases, the
empirical distribution of every prediction-plus-residual sum as the fitted
response distribution, a robust location functional evaluated on it, and a
plug-in asymptotic standard error.
"""

from .backend import BACKEND, available_backends
from .breakdown import (ContaminationScheme, FsbpReport, Placement,
                        contaminate, design_concentration, empirical_fsbp,
                        regression_bdp, scheme_grid, theorem4_bound, uabp)
from .convolution import ConvolvedDistribution
from .convolution import build as build_convolution
from .dataio import Dataset, load_csv
from .errors import (DegenerateConstant, DegenerateDesign, EmptyDistribution,
                     EmptyObservedSet, IndicatorConflict, MeanHasNoUABP,
                     MissingCovariate, NoConvergence, NonFiniteResidual,
                     ParseError, RoblocError, SingularA0, Underdetermined,
                     ZeroDensity)
from .inference import (IFConstants, VarianceEstimate, estimate_if_constants,
                        estimate_tau_sq, gaussian_kde_at, location_if,
                        location_if_prime, median_if, regression_if,
                        silverman_bandwidth)
from .kernels import (K_EFF_85, K_EFF_90, K_EFF_95, K_GAUSS_CONSISTENT_50,
                      K_SCALE_50, RhoFamily, RhoKernel, bisquare, psi,
                      psi_prime, rho, weight)
from .location import (LocationKind, LocationResult, LocationSpec,
                       WeightedSample, evaluate, evaluate_detailed,
                       location_preset, mm_location_on_sample)
from .mscale import MScaleResult, ScaleProblem, mscale_of, solve_m_scale
from .pipeline import (LocationEstimate, PipelineOptions, RunReport,
                       estimate_command, make_pipeline)
from .regression import (CompleteCaseSample, ModelKind, RegressionFit,
                         RegressionModel, SearchConfig, check_gradient,
                         fit_least_squares, fit_mm_regression,
                         fit_s_regression, linear_model,
                         resampling_candidates, user_model)
from .simulate import (Contamination, Estimator, SimReport, SimScenario,
                       SweepReport, contamination_grid, default_estimators,
                       generate_replicate, run_contamination_sweep,
                       run_study)

__version__ = "0.1.0"
