"""Sparse errors-in-variables estimation by simulation, selection, and
extrapolation.

The package provides: synthetic data generators and microarray
standardization (data), penalized solvers with cross-validation (solvers),
the noise-augmentation simulation step (simex), group-lasso selection across
solution paths (selection), trend extrapolation to the error-free scale
(extrapolation), cubic B-spline additive models (splines), end-to-end
pipelines (pipeline), and an experiment harness with a CLI (experiments,
cli).
"""

from .data import (ContaminatedDataset, CoxSimConfig, LinearSimConfig,
                   OutcomeVector, SplineSimConfig, ar1_covariance, delta_v,
                   generate_cox_dataset, generate_linear_dataset,
                   generate_logistic_dataset, generate_spline_dataset,
                   standardize_microarray)
from .errors import ConfigError, NumericalError
from .experiments import (ExperimentConfig, MetricsRow, fp_fn, l2_error,
                          run_experiment, simex_failure_demo, table_configs)
from .extrapolation import (ExtrapolationModel, SparseEstimate, extrapolate,
                            fit_extrapolant, simselex_assemble)
from .pipeline import simex_noselect_fit, simselex_fit
from .selection import (GroupLassoFit, PathDesign, build_design, cv_select_xi2,
                        group_lasso_paths, norm_paths,
                        select_spline_all_coefficients, select_spline_covariates,
                        zero_rule)
from .simex import (CvLassoSolver, LambdaGrid, SolutionPath, generate_pseudodata,
                    make_lambda_grid, naive_fit, oracle_fit, simulation_step)
from .solvers import (CorrectedLassoFit, CvResult, LassoFit, SparseGroupLassoFit,
                      corrected_lasso, cox_neg_log_partial_likelihood,
                      cross_validate, cv_corrected_lasso, cv_lasso_fit,
                      kfold_indices, lasso_cox, lasso_linear, lasso_logistic,
                      penalty_grid, soft_threshold, sparse_group_lasso_spline)
from .splines import (AdditiveFit, SplineBasis, bspline_eval, build_basis,
                      design_matrix, fit_additive, ise, mise, percentile_knots,
                      simselex_spline)

__version__ = "0.1.0"
