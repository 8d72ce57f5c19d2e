"""Designs of experiments in the unit hypercube, plus scaling to physical units.

Three generators are provided:

* ``sobol_sequence`` -- deterministic low-discrepancy points built from the
  Joe-Kuo direction numbers shipped as a data file. The raw sequence starts
  with the all-zeros point at index 0; that point is never emitted.
  ``skip=s`` yields raw points s+1 .. s+count, so identical calls always
  return identical matrices and disjoint blocks can be produced in parallel.
* ``lhs`` -- Latin hypercube with one point per stratum in every dimension.
* ``monte_carlo`` -- plain i.i.d. uniforms.

``lhs`` and ``monte_carlo`` draw from numpy's PCG64 generator seeded with an
explicit 64-bit seed, which is bit-reproducible across platforms.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .input_space import ParameterSpace, Uniform

# Resolution of the Sobol integer lattice: points are k / 2**_SOBOL_BITS.
# 52 bits keeps every coordinate exactly representable in a double.
_SOBOL_BITS = 52

_MAX_DIM = 64


@dataclass(frozen=True)
class DesignMatrix:
    """An N x n block of sample points plus bookkeeping.

    ``form`` is one of ``unit`` ([0,1)^n), ``standard`` (the orthogonal
    polynomial domain) or ``physical``. ``provenance`` records the generator
    and its seed/skip so a design can be regenerated from its header alone.
    """

    points: np.ndarray
    form: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise PreconditionError(f"design must be a 2-D matrix, got shape {pts.shape}")
        if self.form == "unit" and (pts.min() < 0.0 or pts.max() >= 1.0):
            raise PreconditionError("unit-form design entries must lie in [0, 1)")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _load_direction_table():
    """Parse the packaged Joe-Kuo direction-number table (dims 2..64)."""
    text = (importlib.resources.files("uqforge") / "data/joe_kuo_dirnums.txt").read_text()
    rows = {}
    for line in text.splitlines()[1:]:
        if not line.strip():
            continue
        head = line.split("\t")
        d, s, a = int(head[0]), int(head[1]), int(head[2])
        m = [int(tok) for tok in head[3].split()]
        rows[d] = (s, a, m)
    return rows


_DIRECTION_ROWS = None


def _direction_vectors(dim: int) -> np.ndarray:
    """Direction integers V[j][k], scaled so point = integer / 2**_SOBOL_BITS."""
    global _DIRECTION_ROWS
    if _DIRECTION_ROWS is None:
        _DIRECTION_ROWS = _load_direction_table()
    nbits = _SOBOL_BITS
    V = np.zeros((dim, nbits + 1), dtype=np.uint64)
    # dimension 1: plain radix-2 van der Corput, m_k = 1 for all k
    for k in range(1, nbits + 1):
        V[0, k] = np.uint64(1) << np.uint64(nbits - k)
    for j in range(2, dim + 1):
        s, a, m = _DIRECTION_ROWS[j]
        v = [0] * (nbits + 1)
        for k in range(1, min(s, nbits) + 1):
            v[k] = m[k - 1] << (nbits - k)
        for k in range(s + 1, nbits + 1):
            v[k] = v[k - s] ^ (v[k - s] >> s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    v[k] ^= v[k - i]
        V[j - 1, :] = v
    return V


def sobol_sequence(dim: int, count: int, skip: int = 0) -> DesignMatrix:
    """Generate ``count`` Sobol points in [0,1)^dim, raw indices skip+1 .. skip+count.

    Deterministic: identical arguments always produce identical output. The
    all-zeros raw point (index 0) is never emitted; it sits on the domain
    corner and degrades regression conditioning.
    """
    if dim < 1:
        raise PreconditionError("sobol_sequence: dim must be >= 1")
    if dim > _MAX_DIM:
        raise PreconditionError(
            f"sobol_sequence: dim {dim} exceeds the embedded direction-number table ({_MAX_DIM})")
    if count < 1:
        raise PreconditionError("sobol_sequence: count must be >= 1")
    if skip < 0:
        raise PreconditionError("sobol_sequence: skip must be >= 0")
    V = _direction_vectors(dim)
    state = np.zeros(dim, dtype=np.uint64)
    out = np.empty((count, dim), dtype=np.uint64)
    for i in range(1, skip + count + 1):
        # Gray-code update: flip the direction of the lowest zero bit of i-1
        j = i - 1
        c = 1
        while j & 1:
            j >>= 1
            c += 1
        state ^= V[:, c]
        if i > skip:
            out[i - skip - 1] = state
    pts = out.astype(float) / float(1 << _SOBOL_BITS)
    return DesignMatrix(pts, "unit", {"kind": "sobol", "skip": skip})


def lhs(dim: int, count: int, seed: int) -> DesignMatrix:
    """Latin hypercube: one point in each stratum [k/count, (k+1)/count) per axis."""
    if dim < 1 or count < 1:
        raise PreconditionError("lhs: dim and count must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    pts = np.empty((count, dim))
    for j in range(dim):
        perm = rng.permutation(count)
        pts[:, j] = (perm + rng.random(count)) / count
    return DesignMatrix(pts, "unit", {"kind": "lhs", "seed": seed})


def monte_carlo(dim: int, count: int, seed: int) -> DesignMatrix:
    """i.i.d. uniform [0,1) draws from PCG64 with the given seed."""
    if dim < 1 or count < 1:
        raise PreconditionError("monte_carlo: dim and count must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    return DesignMatrix(rng.random((count, dim)), "unit", {"kind": "mc", "seed": seed})


# Coefficients of Acklam's rational approximation to the inverse normal CDF.
_ICDF_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
           1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ICDF_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
           6.680131188771972e+01, -1.328068155288572e+01)
_ICDF_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
           -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ICDF_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
           3.754408661907416e+00)


def inverse_normal_cdf(u):
    """Standard normal quantile function.

    Acklam's rational approximation (relative error < 1.15e-9) refined by one
    Halley step through erfc, which brings the result to double precision.
    The computation runs entirely in the lower half via the symmetry
    quantile(u) = -quantile(1-u); for u >= 0.5 the reflection 1-u is exact in
    floating point, and the lower-tail erfc form avoids cancellation.
    Vectorized; u=0 and u=1 map to -inf/+inf.
    """
    from scipy.special import erfc

    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    if np.any((u < 0.0) | (u > 1.0)) or not np.all(np.isfinite(u)):
        raise PreconditionError("inverse_normal_cdf: argument outside [0, 1]")
    flip = u > 0.5
    v = np.where(flip, 1.0 - u, u)

    x = np.empty_like(v)
    x[v == 0.0] = -np.inf
    tail = (v < 0.02425) & (v > 0.0)
    center = v >= 0.02425
    if np.any(center):
        q = v[center] - 0.5
        r = q * q
        num = ((((_ICDF_A[0] * r + _ICDF_A[1]) * r + _ICDF_A[2]) * r + _ICDF_A[3]) * r + _ICDF_A[4]) * r + _ICDF_A[5]
        den = ((((_ICDF_B[0] * r + _ICDF_B[1]) * r + _ICDF_B[2]) * r + _ICDF_B[3]) * r + _ICDF_B[4]) * r + 1.0
        x[center] = num * q / den
    if np.any(tail):
        with np.errstate(divide="ignore"):
            q = np.sqrt(-2.0 * np.log(v[tail]))
        num = ((((_ICDF_C[0] * q + _ICDF_C[1]) * q + _ICDF_C[2]) * q + _ICDF_C[3]) * q + _ICDF_C[4]) * q + _ICDF_C[5]
        den = (((_ICDF_D[0] * q + _ICDF_D[1]) * q + _ICDF_D[2]) * q + _ICDF_D[3]) * q + 1.0
        x[tail] = num / den

    finite = np.isfinite(x)
    if np.any(finite):
        # Halley step on Phi(x) - v = 0; x <= 0 here so erfc sees a
        # nonnegative argument and keeps full relative accuracy in the tail
        xf = x[finite]
        err = 0.5 * erfc(-xf / np.sqrt(2.0)) - v[finite]
        dens = np.exp(-0.5 * xf * xf) / np.sqrt(2.0 * np.pi)
        upd = err / dens
        x[finite] = xf - upd / (1.0 + 0.5 * xf * upd)
    x = np.where(flip, -x, x)
    return x[0] if scalar else x


def scale(design: DesignMatrix, space: ParameterSpace) -> DesignMatrix:
    """Map a unit-form design to physical units via per-coordinate inverse CDFs."""
    if design.form != "unit":
        raise PreconditionError(f"scale expects a unit-form design, got {design.form!r}")
    if design.dim != space.dim:
        raise PreconditionError(
            f"design dimension {design.dim} does not match space dimension {space.dim}")
    pts = np.empty_like(design.points)
    for j, p in enumerate(space):
        u = design.points[:, j]
        if isinstance(p.dist, Uniform):
            pts[:, j] = p.dist.lo + u * (p.dist.hi - p.dist.lo)
        else:
            pts[:, j] = p.dist.mean + p.dist.stddev * inverse_normal_cdf(u)
    return DesignMatrix(pts, "physical", dict(design.provenance))


def save_design(design: DesignMatrix, path) -> None:
    """Write a design as CSV with a `# doe ...` metadata header, %.17g precision."""
    meta = {"kind": design.provenance.get("kind", "unknown"),
            "dim": design.dim, "n": design.count}
    for key in ("skip", "seed"):
        if key in design.provenance:
            meta[key] = design.provenance[key]
    meta["form"] = design.form
    header = "# doe " + " ".join(f"{k}={v}" for k, v in meta.items())
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in design.points:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_design(path) -> DesignMatrix:
    """Read a design written by :func:`save_design`."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# doe"):
            raise PreconditionError(f"{path}: not a DOE csv (missing '# doe' header)")
        meta = {}
        for tok in header[len("# doe"):].split():
            key, _, val = tok.partition("=")
            meta[key] = val
        rows = [[float(tok) for tok in line.split(",")] for line in fh if line.strip()]
    pts = np.asarray(rows, dtype=float)
    prov = {"kind": meta.get("kind", "unknown")}
    for key in ("skip", "seed"):
        if key in meta:
            prov[key] = int(meta[key])
    return DesignMatrix(pts, meta.get("form", "unit"), prov)
