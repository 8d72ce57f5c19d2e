"""uqforge: surrogate-based uncertainty quantification for black-box models.

Builds polynomial chaos, Kriging and PC-Kriging surrogates from designs of
experiments, extracts statistical moments and Sobol' sensitivity indices,
and ships a quasi-1D supersonic nozzle model plus an end-to-end demo study
around it.
"""

from .chaos import (BasisSet, PceModel, basis_for_space, eval_basis,
                    fit_regression, pce_moments, pce_predict, pce_sobol,
                    total_degree_indices)
from .doe import (DesignMatrix, inverse_normal_cdf, lhs, load_design,
                  monte_carlo, save_design, scale, sobol_sequence)
from .errors import ConfigError, ExternalModelError, PreconditionError, UqError
from .input_space import (Normal, Parameter, ParameterSpace, Uniform,
                          load_space, parse_space)
from .kriging import (Kernel, KrigingModel, TrendBasis, constant_trend,
                      correlation_matrix, cross_correlation, fit_given_theta,
                      linear_trend, mle_train, pce_trend, predict)
from .models import (ModelSpec, ResponseSet, builtin_model, evaluate_batch,
                     external_model, ishigami, nozzle_q1d)
from .pck import PckModel, fit_pck, pck_moments, pck_predict
from .sensitivity import SobolIndices, saltelli_sobol, sobol_compare

__version__ = "0.1.0"
