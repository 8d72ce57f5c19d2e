"""Gaussian-process interpolation with a generalized-least-squares trend.

The response is modeled as trend(x) + a stationary zero-mean unit-variance
process scaled by sigma^2, with an anisotropic correlation kernel. Given the
length scales, the trend coefficients solve the GLS normal system through
Cholesky factorizations (never explicit inverses), the process variance is
the R-weighted mean-square residual, and the predictor mean/variance follow
from the conditional-normal identities. Length scales are trained by
maximizing the concentrated log-likelihood

    -(N/2) ln sigma^2(theta) - (1/2) ln det R(theta)

over log theta with a bounded quasi-Newton search from several deterministic
starting points (a Sobol design in log-space), using the analytic gradient.
One SPD factorization of R is computed per candidate theta and reused for
the trend solve, the variance and all predictions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.linalg import lapack
from scipy.optimize import minimize

from . import chaos, doe
from .errors import PreconditionError

log = logging.getLogger(__name__)

KERNEL_FAMILIES = ("squared-exponential", "matern52")

_SQRT5 = np.sqrt(5.0)


@dataclass(frozen=True)
class Kernel:
    """Stationary correlation kernel with per-dimension length scales."""

    family: str
    theta: np.ndarray
    nugget: float = 1e-10

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise PreconditionError(f"unknown kernel family {self.family!r}")
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if np.any(theta <= 0.0):
            raise PreconditionError("kernel length scales must be positive")
        if self.nugget < 0.0:
            raise PreconditionError("nugget must be nonnegative")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)


def _scaled_sq_dists(kernel: Kernel, X, Z) -> np.ndarray:
    # |x-z|^2 in theta-scaled coordinates via the gemm expansion; built
    # in place because prediction sweeps call this on large blocks
    Xs = X / kernel.theta
    Zs = Z / kernel.theta
    sq = Xs @ (-2.0 * Zs).T
    sq += np.einsum("ij,ij->i", Xs, Xs)[:, None]
    sq += np.einsum("ij,ij->i", Zs, Zs)[None, :]
    np.maximum(sq, 0.0, out=sq)
    return sq


def _corr_from_sq(family: str, sq: np.ndarray) -> np.ndarray:
    # consumes sq as a scratch buffer
    if family == "squared-exponential":
        np.negative(sq, out=sq)
        return np.exp(sq, out=sq)
    t = np.sqrt(sq, out=sq)
    t *= _SQRT5
    poly = 1.0 + t + t * t / 3.0
    np.negative(t, out=t)
    np.exp(t, out=t)
    poly *= t
    return poly


def correlation_matrix(kernel: Kernel, X) -> np.ndarray:
    """Correlation matrix of the training points, nugget added on the diagonal."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    R = _corr_from_sq(kernel.family, _scaled_sq_dists(kernel, X, X))
    np.fill_diagonal(R, 1.0 + kernel.nugget)
    return R


def cross_correlation(kernel: Kernel, X, Z) -> np.ndarray:
    """Correlations between new points Z (rows) and training points X (columns)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    return _corr_from_sq(kernel.family, _scaled_sq_dists(kernel, Z, X))


@dataclass(frozen=True)
class TrendBasis:
    """Trend regressors: constant, linear, or a polynomial chaos basis."""

    kind: str
    dim: int
    basis: chaos.BasisSet | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "linear", "pce"):
            raise PreconditionError(f"unknown trend kind {self.kind!r}")
        if self.kind == "pce" and self.basis is None:
            raise PreconditionError("pce trend needs a BasisSet")

    @property
    def size(self) -> int:
        if self.kind == "constant":
            return 1
        if self.kind == "linear":
            return self.dim + 1
        return self.basis.size

    def eval(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "constant":
            return np.ones((X.shape[0], 1))
        if self.kind == "linear":
            return np.hstack([np.ones((X.shape[0], 1)), X])
        return chaos.eval_basis(self.basis, X)


def constant_trend(dim: int) -> TrendBasis:
    return TrendBasis("constant", dim)


def linear_trend(dim: int) -> TrendBasis:
    return TrendBasis("linear", dim)


def pce_trend(basis: chaos.BasisSet) -> TrendBasis:
    return TrendBasis("pce", basis.dim, basis)


@dataclass
class KrigingModel:
    """Fitted interpolator; immutable by convention, safe to share.

    Holds the training data in standard coordinates, the trained kernel, the
    trend coefficients and process variance, plus the factorizations reused
    by every prediction.
    """

    X: np.ndarray
    y: np.ndarray
    kernel: Kernel
    trend: TrendBasis
    beta: np.ndarray
    sigma2: float
    loo_error: float
    log_likelihood: float
    _chol: tuple = field(repr=False, default=None)
    _alpha: np.ndarray = field(repr=False, default=None)
    _ri_f: np.ndarray = field(repr=False, default=None)
    _gls_chol: tuple = field(repr=False, default=None)
    clamp_events: int = 0
    worst_clamp: float = 0.0

    @property
    def train_count(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def predict(self, x):
        return predict(self, x)

    def predict_mean(self, x, chunk: int = 20000, trend_values=None) -> np.ndarray:
        """Predictor mean only; chunked so large probe sets stay cache-friendly.

        ``trend_values`` may carry precomputed trend regressors for x (useful
        when many models share one trend basis and probe set); values equal
        the default path bit for bit.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        out = np.empty(pts.shape[0])
        for start in range(0, pts.shape[0], chunk):
            block = pts[start:start + chunk]
            f = self.trend.eval(block) if trend_values is None \
                else trend_values[start:start + chunk]
            r = cross_correlation(self.kernel, self.X, block)
            out[start:start + chunk] = f @ self.beta + r @ self._alpha
        return out[0] if single else out


def fit_given_theta(X, y, kernel: Kernel, trend: TrendBasis) -> KrigingModel:
    """Fit trend coefficients and process variance at fixed length scales.

    Solves the GLS system through one Cholesky factorization of the
    correlation matrix; the same factorization is cached on the model for
    predictions. Also computes the closed-form leave-one-out error from the
    trend-projected precision matrix.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    if y.shape[0] != n:
        raise PreconditionError("X and y row counts differ")
    if n <= trend.size:
        raise PreconditionError(
            f"need more samples than trend functions: N={n}, trend size={trend.size}")
    R = correlation_matrix(kernel, X)
    try:
        chol = scipy.linalg.cho_factor(R, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        sq = _scaled_sq_dists(kernel, X, X)
        np.fill_diagonal(sq, np.inf)
        i, j = np.unravel_index(np.argmin(sq), sq.shape)
        raise PreconditionError(
            f"correlation matrix is not positive definite (closest points: rows {i} and {j}, "
            f"scaled distance {np.sqrt(sq[i, j]):.3e}; increase the nugget)") from None
    F = trend.eval(X)
    ri_f = scipy.linalg.cho_solve(chol, F, check_finite=False)
    ri_y = scipy.linalg.cho_solve(chol, y, check_finite=False)
    gls = F.T @ ri_f
    try:
        gls_chol = scipy.linalg.cho_factor(gls, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        raise PreconditionError("trend regressors are rank-deficient on this design") from None
    beta = scipy.linalg.cho_solve(gls_chol, F.T @ ri_y, check_finite=False)
    resid = y - F @ beta
    alpha = scipy.linalg.cho_solve(chol, resid, check_finite=False)
    sigma2 = float(resid @ alpha) / n
    if sigma2 < 0.0:  # roundoff on degenerate data
        sigma2 = 0.0
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol[0]))))
    with np.errstate(divide="ignore"):
        ll = -0.5 * n * np.log(max(sigma2, 1e-300)) - 0.5 * logdet

    # leave-one-out residuals e_i = [C y]_i / C_ii with C the precision of the
    # trend-projected process (Dubrule's cross-validation identity)
    rinv = scipy.linalg.cho_solve(chol, np.eye(n), check_finite=False)
    C = rinv - ri_f @ scipy.linalg.cho_solve(gls_chol, ri_f.T, check_finite=False)
    cy = C @ y
    cdiag = np.diag(C).copy()
    denom = float(np.sum((y - y.mean()) ** 2))
    good = cdiag > 1e-300
    loo_terms = np.zeros(n)
    loo_terms[good] = (cy[good] / cdiag[good]) ** 2
    loo = float(np.sum(loo_terms) / denom) if denom > 0 else 0.0

    return KrigingModel(X=X, y=y, kernel=kernel, trend=trend, beta=beta,
                        sigma2=sigma2, loo_error=loo, log_likelihood=float(ll),
                        _chol=chol, _alpha=alpha, _ri_f=ri_f, _gls_chol=gls_chol)


def predict(model: KrigingModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Predictor mean and variance at standard points.

    mean = f(x)^T beta + r(x)^T R^-1 (y - F beta); the variance combines the
    correlation shrinkage with the trend-estimation inflation term through
    u = F^T R^-1 r - f. Small negative variances from roundoff are clamped
    to zero and counted on the model.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != model.dim:
        raise PreconditionError(f"expected {model.dim} coordinates, got {pts.shape[1]}")
    f = model.trend.eval(pts)
    r = cross_correlation(model.kernel, model.X, pts)
    mean = f @ model.beta + r @ model._alpha
    ri_r = scipy.linalg.cho_solve(model._chol, r.T, check_finite=False)
    quad_r = np.einsum("ij,ji->i", r, ri_r)
    u = model._ri_f.T @ r.T - f.T
    quad_u = np.einsum("ij,ij->j", u, scipy.linalg.cho_solve(model._gls_chol, u, check_finite=False))
    var = model.sigma2 * (1.0 - quad_r + quad_u)
    neg = var < 0.0
    if np.any(neg):
        worst = float(var.min())
        model.clamp_events += int(np.count_nonzero(neg))
        model.worst_clamp = min(model.worst_clamp, worst)
        if worst < -1e-8 * max(model.sigma2, 1e-300):
            log.warning("predictive variance clamp of %g exceeds the roundoff "
                        "contract of 1e-8*sigma2", worst)
        var = np.where(neg, 0.0, var)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


class _Concentrated:
    """Concentrated negative log-likelihood and gradient in log length scales.

    Precomputes the per-dimension squared-difference matrices and trend
    regressors once, so one instance can train many response columns on the
    same design cheaply.
    """

    def __init__(self, X, trend: TrendBasis, family: str, nugget: float):
        self.X = X
        self.n, self.dim = X.shape
        self.family = family
        self.nugget = nugget
        self.F = trend.eval(X)
        diffs = X[:, None, :] - X[None, :, :]
        self.dflat = np.ascontiguousarray(np.moveaxis(diffs * diffs, 2, 0)).reshape(self.dim, -1)
        self.eye = np.eye(self.n)
        self.y = None

    def set_response(self, y):
        self.y = np.asarray(y, dtype=float).ravel()

    def nll_grad(self, eta):
        n = self.n
        inv_th2 = np.exp(-2.0 * eta)
        sq = (inv_th2 @ self.dflat).reshape(n, n)
        if self.family == "squared-exponential":
            R = np.exp(-sq)
            dr_pref = 2.0 * R
        else:
            t = _SQRT5 * np.sqrt(sq)
            et = np.exp(-t)
            R = (1.0 + t + t * t / 3.0) * et
            dr_pref = (5.0 / 3.0) * (1.0 + t) * et
        Rn = R + self.nugget * self.eye
        c, info = lapack.dpotrf(Rn, lower=1)
        if info != 0:
            return 1e30, np.zeros(self.dim)
        ri_f, _ = lapack.dpotrs(c, self.F, lower=1)
        ri_y, _ = lapack.dpotrs(c, self.y, lower=1)
        gls = self.F.T @ ri_f
        cg, info2 = lapack.dpotrf(gls, lower=1)
        if info2 != 0:
            return 1e30, np.zeros(self.dim)
        beta, _ = lapack.dpotrs(cg, self.F.T @ ri_y, lower=1)
        resid = self.y - self.F @ beta
        alpha, _ = lapack.dpotrs(c, resid, lower=1)
        s2 = float(resid @ alpha) / n
        if s2 <= 1e-250:
            # degenerate: the trend reproduces the data exactly; likelihood is
            # flat at -inf in this direction, report a floor and stop moving
            return -1e30, np.zeros(self.dim)
        logdet = 2.0 * float(np.sum(np.log(np.diag(c))))
        f = 0.5 * n * np.log(s2) + 0.5 * logdet
        rinv_raw, _ = lapack.dpotri(c, lower=1)
        rl = np.tril(rinv_raw)
        rinv = rl + rl.T
        np.fill_diagonal(rinv, np.diag(rinv_raw))
        trace_mat = (rinv * dr_pref).ravel()
        quad_mat = (np.outer(alpha, alpha) * dr_pref).ravel()
        traces = self.dflat @ trace_mat
        quads = self.dflat @ quad_mat
        grad = inv_th2 * (-0.5 * quads / s2 + 0.5 * traces)
        return f, grad


def concentrated_nll(X, y, kernel: Kernel, trend: TrendBasis) -> float:
    """Concentrated negative log-likelihood at the kernel's length scales."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    obj = _Concentrated(X, trend, kernel.family, kernel.nugget)
    obj.set_response(y)
    f, _ = obj.nll_grad(np.log(kernel.theta))
    return float(f)


def mle_train(X, y, kernel_family: str = "squared-exponential", trend: TrendBasis = None,
              bounds: tuple[float, float] = (1e-2, 1e2), n_starts: int = 8,
              nugget: float = 1e-10, maxiter: int = 150):
    """Train length scales by maximum likelihood and return the fitted model.

    Runs a bounded L-BFGS-B search in log theta from ``n_starts`` points of a
    Sobol design spanning the (log) bounds, all deterministic, and keeps the
    best optimum. ``y`` may be a single column or an (N, m) matrix; the
    expensive design-dependent precomputations are shared, and a list of
    models (one per column) is returned in column order.

    Raises
    ------
    PreconditionError
        If N < trend size + 2, or every start fails to factorize.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(y, dtype=float)
    single = Y.ndim == 1
    Y = Y[:, None] if single else Y
    n, dim = X.shape
    if trend is None:
        trend = constant_trend(dim)
    if kernel_family not in KERNEL_FAMILIES:
        raise PreconditionError(f"unknown kernel family {kernel_family!r}")
    if n < trend.size + 2:
        raise PreconditionError(
            f"MLE needs N >= trend size + 2: N={n}, trend size={trend.size}")
    lo, hi = np.log(bounds[0]), np.log(bounds[1])
    starts = lo + (hi - lo) * doe.sobol_sequence(dim, n_starts).points
    box = [(lo, hi)] * dim
    obj = _Concentrated(X, trend, kernel_family, nugget)

    models = []
    for col in range(Y.shape[1]):
        obj.set_response(Y[:, col])
        best_fun, best_eta = np.inf, None
        for eta0 in starts:
            res = minimize(obj.nll_grad, eta0, jac=True, method="L-BFGS-B",
                           bounds=box, options={"maxiter": maxiter})
            if res.fun < best_fun:
                best_fun, best_eta = res.fun, res.x
        if best_eta is None or best_fun >= 1e29:
            raise PreconditionError(
                f"MLE failed: no start produced a positive-definite correlation matrix "
                f"(column {col}, {n_starts} starts, nugget {nugget})")
        kernel = Kernel(kernel_family, np.exp(best_eta), nugget)
        models.append(fit_given_theta(X, Y[:, col], kernel, trend))
    return models[0] if single else models
