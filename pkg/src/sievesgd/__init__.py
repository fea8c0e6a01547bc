"""Iterative convex-optimization estimators for semiparametric
binary-choice and monotone index models, with sandwich inference and a
Monte Carlo harness."""

from .errors import (ConfigError, DegenerateIndexError, NonInvertibleError,
                     NormalizationError, NumericError, RankError, SsgdError,
                     ValidationError)
from .estimator import (FitResult, IteratePath, SsgdConfig, TuningRule,
                        default_tuning, group_update, learning_rate,
                        normalize_scale, run_sgd_known_g, run_ssgd_average,
                        run_ssgd_group)
from .inference import (SandwichVcov, confidence_intervals, estimate_sigma1,
                        estimate_sigma2, normalized_confidence_intervals,
                        normalized_vcov, sandwich_vcov)
from .model import (Dataset, LinkFunction, batch_mean_gradient, cauchy_link,
                    logistic_link, loss_gradient, loss_value, normal_link,
                    validate_dataset)
from .sieve import (SieveBasis, SieveFit, build_basis, fit_series_logit,
                    plain_logit, sieve_cdf, sieve_cdf_derivative)
from .simulate import (DgpSpec, McReport, generate, run_monte_carlo,
                       worker_count)

__version__ = "0.1.0"
