"""PC-Kriging: Gaussian-process interpolation on a polynomial chaos trend.

The trend regressors are the orthonormal total-degree chaos basis of the
input space, so the stationary process only has to carry what the global
polynomial part misses. Trend coefficients and length scales are estimated
jointly: the GLS trend solve sits inside the concentrated likelihood that
the length-scale search maximizes, giving one consistent estimator rather
than a two-step polynomial-then-residual construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import chaos, doe, kriging
from .errors import PreconditionError
from .input_space import ParameterSpace


@dataclass
class PckModel:
    """A Kriging model with chaos trend, tied to its originating space."""

    krig: kriging.KrigingModel
    space: ParameterSpace
    order: int

    @property
    def trend_coeffs(self) -> np.ndarray:
        return self.krig.beta

    @property
    def basis(self) -> chaos.BasisSet:
        return self.krig.trend.basis

    @property
    def loo_error(self) -> float:
        return self.krig.loo_error

    def predict(self, xi):
        return pck_predict(self, xi)

    def predict_mean(self, xi, chunk: int = 20000):
        return self.krig.predict_mean(xi, chunk=chunk)

    def moments(self, draws: int = 100000, seed: int = 0):
        return pck_moments(self, draws, seed)


def fit_pck(space: ParameterSpace, design, y, order: int = 2,
            kernel_family: str = "squared-exponential", n_starts: int = 8,
            bounds: tuple[float, float] = (1e-2, 1e2), nugget: float = 1e-10,
            maxiter: int = 150):
    """Fit PC-Kriging surrogates on a standard-form design.

    ``y`` may be one column or an (N, m) matrix; one model per column is
    returned, sharing the design precomputations. The chaos trend must be
    strictly overdetermined: N > basis size.

    Raises
    ------
    PreconditionError
        If N <= basis size (lower the order or add samples).
    """
    pts = design.points if isinstance(design, doe.DesignMatrix) else \
        np.atleast_2d(np.asarray(design, dtype=float))
    if isinstance(design, doe.DesignMatrix) and design.form != "standard":
        raise PreconditionError(f"fit_pck expects a standard-form design, got {design.form!r}")
    if pts.shape[1] != space.dim:
        raise PreconditionError(
            f"design dimension {pts.shape[1]} does not match space dimension {space.dim}")
    basis = chaos.basis_for_space(space, order)
    n = pts.shape[0]
    if n <= basis.size:
        raise PreconditionError(
            f"PC-Kriging trend needs N > P: N={n}, P={basis.size} at order {order}; "
            f"lower the order or add samples")
    trend = kriging.pce_trend(basis)
    fitted = kriging.mle_train(pts, y, kernel_family=kernel_family, trend=trend,
                               bounds=bounds, n_starts=n_starts, nugget=nugget,
                               maxiter=maxiter)
    if isinstance(fitted, list):
        return [PckModel(m, space, order) for m in fitted]
    return PckModel(fitted, space, order)


def pck_predict(model: PckModel, xi):
    """Predictor mean and variance at standard points (delegates to kriging)."""
    return kriging.predict(model.krig, xi)


def pck_moments(model: PckModel, draws: int = 100000, seed: int = 0,
                chunk: int = 20000) -> tuple[float, float]:
    """Monte Carlo mean and sample standard deviation of the surrogate.

    Draws ``draws`` points from the input distributions (PCG64, fixed seed),
    pushes them through the predictor mean and returns the sample mean and
    standard deviation. Deterministic for a fixed seed; the reduction order
    is fixed as well, so the reported value is bit-reproducible.
    """
    unit = doe.monte_carlo(model.space.dim, draws, seed)
    std_pts = model.space.to_standard(doe.scale(unit, model.space).points)
    vals = model.krig.predict_mean(std_pts, chunk=chunk)
    return float(np.mean(vals)), float(np.std(vals, ddof=1))
