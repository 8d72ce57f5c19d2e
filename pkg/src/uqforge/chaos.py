"""Polynomial chaos expansions on orthonormal bases.

The basis is the total-degree set of products of 1-D orthonormal polynomials,
Legendre for uniform inputs and probabilists' Hermite for normal inputs, both
evaluated by their three-term recurrences and rescaled to unit norm under the
corresponding probability measure. With unit-norm basis functions the model
mean is the leading coefficient, the variance is the sum of the squared
remaining coefficients, and Sobol' indices are partial sums of the same
squares grouped by which inputs a basis term touches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .doe import DesignMatrix
from .errors import PreconditionError
from .input_space import ParameterSpace, Uniform
from .sensitivity import SobolIndices


def total_degree_count(n: int, p: int) -> int:
    """Number of multi-indices with n entries and total degree <= p."""
    return math.comb(n + p, p)


def _compositions(total, parts):
    # all nonnegative integer tuples of given length summing to total,
    # first coordinate decreasing (lexicographically descending order)
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def total_degree_indices(n: int, p: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices with total degree <= p in graded-lex order.

    The zero index comes first; within one total degree, indices are ordered
    lexicographically descending. The count is binomial(n+p, p).
    """
    if n < 1:
        raise PreconditionError("total_degree_indices: n must be >= 1")
    if p < 0:
        raise PreconditionError("total_degree_indices: p must be >= 0")
    count = total_degree_count(n, p)
    if count > 2 ** 31:
        raise PreconditionError(f"basis of {count} terms exceeds supported size")
    out = []
    for deg in range(p + 1):
        out.extend(_compositions(deg, n))
    assert len(out) == count
    return tuple(out)


@dataclass(frozen=True)
class BasisSet:
    """Orthonormal tensor-product basis: per-dimension family plus index set."""

    families: tuple[str, ...]
    indices: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for fam in self.families:
            if fam not in ("legendre", "hermite"):
                raise PreconditionError(f"unknown polynomial family {fam!r}")
        for b in self.indices:
            if len(b) != len(self.families):
                raise PreconditionError("index length does not match dimension")

    @property
    def dim(self) -> int:
        return len(self.families)

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def max_degree(self) -> int:
        return max(sum(b) for b in self.indices)


def basis_for_space(space: ParameterSpace, p: int) -> BasisSet:
    """Total-degree basis matched to the space's marginals."""
    families = tuple("legendre" if isinstance(par.dist, Uniform) else "hermite"
                     for par in space)
    return BasisSet(families, total_degree_indices(space.dim, p))


def legendre_orthonormal(x, degree: int) -> np.ndarray:
    """Table of orthonormal Legendre values, shape x.shape + (degree+1,).

    Orthonormal under the uniform probability measure on [-1, 1]: the raw
    recurrence values are scaled by sqrt(2k+1).
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (degree + 1,))
    out[..., 0] = 1.0
    if degree >= 1:
        out[..., 1] = x
    for k in range(1, degree):
        out[..., k + 1] = ((2 * k + 1) * x * out[..., k] - k * out[..., k - 1]) / (k + 1)
    scale = np.sqrt(2.0 * np.arange(degree + 1) + 1.0)
    return out * scale


def hermite_orthonormal(x, degree: int) -> np.ndarray:
    """Table of orthonormal probabilists' Hermite values, unit norm under N(0,1)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (degree + 1,))
    out[..., 0] = 1.0
    if degree >= 1:
        out[..., 1] = x
    for k in range(1, degree):
        out[..., k + 1] = x * out[..., k] - k * out[..., k - 1]
    scale = 1.0 / np.array([math.sqrt(math.factorial(k)) for k in range(degree + 1)])
    return out * scale


_FAMILY_TABLES = {"legendre": legendre_orthonormal, "hermite": hermite_orthonormal}


def eval_basis(basis: BasisSet, xi) -> np.ndarray:
    """Evaluate every basis function at standard points.

    Returns shape (P,) for a single point or (N, P) for a batch. Each entry
    is the product over dimensions of the 1-D orthonormal polynomial at the
    degree given by the multi-index.
    """
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    pts = np.atleast_2d(xi)
    if pts.shape[1] != basis.dim:
        raise PreconditionError(f"expected {basis.dim} coordinates, got {pts.shape[1]}")
    max_deg = [max(b[j] for b in basis.indices) for j in range(basis.dim)]
    # degree-major tables so the accumulation below multiplies contiguous rows
    tables = [np.ascontiguousarray(_FAMILY_TABLES[fam](pts[:, j], max_deg[j]).T)
              for j, fam in enumerate(basis.families)]
    out = np.ones((basis.size, pts.shape[0]))
    for col, b in enumerate(basis.indices):
        for j, bj in enumerate(b):
            if bj:
                out[col] *= tables[j][bj]
    out = np.ascontiguousarray(out.T)
    return out[0] if single else out


@dataclass
class PceModel:
    """Fitted polynomial chaos expansion plus regression diagnostics."""

    space: ParameterSpace
    basis: BasisSet
    coeffs: np.ndarray
    residual_norm: float = 0.0
    condition: float = 1.0
    loo_error: float = 0.0

    def predict(self, xi):
        return pce_predict(self, xi)

    def moments(self):
        return pce_moments(self)

    def sobol(self):
        return pce_sobol(self)


def _as_standard_points(design) -> np.ndarray:
    if isinstance(design, DesignMatrix):
        if design.form != "standard":
            raise PreconditionError(f"regression design must be standard form, got {design.form!r}")
        return design.points
    return np.atleast_2d(np.asarray(design, dtype=float))


def fit_regression(space: ParameterSpace, basis: BasisSet, design, y,
                   mask=None) -> PceModel:
    """Least-squares fit of expansion coefficients to model responses.

    ``design`` holds standard-form points row-aligned with ``y``; rows where
    ``mask`` is True are dropped. The system must be overdetermined (N >= P
    after masking). The fit uses an SVD-based solver; diagnostics cover the
    residual norm, the matrix condition estimate and the closed-form
    leave-one-out error (relative to the response variance) obtained from the
    hat-matrix diagonal, so no refits are needed to judge surrogate quality.
    """
    pts = _as_standard_points(design)
    y = np.asarray(y, dtype=float).ravel()
    if pts.shape[0] != y.shape[0]:
        raise PreconditionError(f"design has {pts.shape[0]} rows but y has {y.shape[0]}")
    if mask is not None:
        keep = ~np.asarray(mask, dtype=bool)
        pts, y = pts[keep], y[keep]
    n_rows = pts.shape[0]
    if n_rows < basis.size:
        raise PreconditionError(
            f"underdetermined regression: {n_rows} samples < {basis.size} basis terms")
    psi = eval_basis(basis, pts)
    coeffs, _, rank, sv = scipy.linalg.lstsq(psi, y, lapack_driver="gelsd")
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if rank < basis.size:
        raise PreconditionError(
            f"regression matrix is rank-deficient (rank {rank} < {basis.size}, "
            f"condition estimate {cond:.3e})")
    resid = y - psi @ coeffs
    # hat-matrix diagonal via the thin QR of psi
    q, _ = np.linalg.qr(psi)
    h = np.einsum("ij,ij->i", q, q)
    denom = np.sum((y - y.mean()) ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        loo_terms = (resid / (1.0 - h)) ** 2
    if denom > 0:
        loo = float(np.sum(loo_terms) / denom)
    else:
        loo = 0.0 if np.allclose(resid, 0.0) else np.inf
    return PceModel(space, basis, coeffs, float(np.linalg.norm(resid)), cond, loo)


def pce_predict(model: PceModel, xi):
    """Expansion value at standard points: coefficients dotted with the basis."""
    vals = eval_basis(model.basis, xi)
    return vals @ model.coeffs


def pce_moments(model: PceModel) -> tuple[float, float]:
    """(mean, variance) read off the coefficients of the unit-norm basis."""
    mean = float(model.coeffs[0])
    var = float(np.sum(model.coeffs[1:] ** 2))
    return mean, var


def pce_sobol(model: PceModel) -> SobolIndices:
    """Sobol' indices from the coefficient variance partition.

    First-order index of input i sums squared coefficients of terms touching
    only input i; the total index sums every term touching input i. A
    zero-variance expansion reports all indices as 0 and is flagged.
    """
    n = model.basis.dim
    sq = model.coeffs ** 2
    var = float(np.sum(sq[1:]))
    first = np.zeros(n)
    total = np.zeros(n)
    if var > 0.0:
        for col, b in enumerate(model.basis.indices):
            support = [j for j, bj in enumerate(b) if bj > 0]
            if not support:
                continue
            for j in support:
                total[j] += sq[col]
            if len(support) == 1:
                first[support[0]] += sq[col]
        first /= var
        total /= var
    return SobolIndices(first_order=first, total=total, evaluation_count=0,
                        estimator="pce-coefficients", zero_variance=(var == 0.0))
