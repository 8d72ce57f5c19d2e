"""Uncertain input spaces and the physical <-> standard coordinate transforms.

A ParameterSpace is an ordered list of named one-dimensional distributions.
Uniform inputs map onto [-1, 1] (the natural support of Legendre polynomials),
normal inputs onto the standard normal. Both transforms are exact affine maps,
so round trips are lossless up to floating-point rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PreconditionError


@dataclass(frozen=True)
class Uniform:
    """Uniform distribution on the closed interval [lo, hi], lo < hi."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise ConfigError(f"uniform bounds must satisfy lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class Normal:
    """Normal distribution with mean and strictly positive stddev."""

    mean: float
    stddev: float

    def __post_init__(self):
        if not (self.stddev > 0):
            raise ConfigError(f"normal stddev must be positive, got {self.stddev}")


Distribution = Uniform | Normal


@dataclass(frozen=True)
class Parameter:
    name: str
    dist: Distribution
    unit: str = ""


class ParameterSpace:
    """Ordered, immutable collection of uncertain parameters.

    Order matters: it fixes the column layout of every design matrix,
    response set and sensitivity report downstream.
    """

    def __init__(self, params):
        params = tuple(params)
        if len(params) < 1:
            raise ConfigError("parameter space needs at least one parameter")
        seen = set()
        for p in params:
            if not p.name:
                raise ConfigError("parameter names must be non-empty")
            if p.name in seen:
                raise ConfigError(f"duplicate parameter name {p.name!r}")
            seen.add(p.name)
        self._params = params

    @property
    def params(self) -> tuple[Parameter, ...]:
        return self._params

    @property
    def dim(self) -> int:
        return len(self._params)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self._params)

    def index(self, name: str) -> int:
        for i, p in enumerate(self._params):
            if p.name == name:
                return i
        raise KeyError(name)

    def __len__(self):
        return len(self._params)

    def __iter__(self):
        return iter(self._params)

    def __getitem__(self, i) -> Parameter:
        return self._params[i]

    def __eq__(self, other):
        return isinstance(other, ParameterSpace) and self._params == other._params

    def __repr__(self):
        inner = ", ".join(p.name for p in self._params)
        return f"ParameterSpace({inner})"

    def nominal(self) -> np.ndarray:
        """Physical point at the center of the space (uniform midpoints, normal means)."""
        return self.to_physical(np.zeros(self.dim))

    def to_standard(self, x) -> np.ndarray:
        """Map physical coordinates into the standard domain.

        Uniform(lo, hi) maps affinely onto [-1, 1]; Normal(mean, stddev) onto
        the standard normal. Accepts a single point of shape (n,) or a batch
        of shape (N, n).

        Raises
        ------
        PreconditionError
            If a uniform coordinate lies outside its [lo, hi] support.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.dim:
            raise PreconditionError(f"expected {self.dim} coordinates, got {pts.shape[1]}")
        out = np.empty_like(pts)
        for j, p in enumerate(self._params):
            col = pts[:, j]
            if isinstance(p.dist, Uniform):
                lo, hi = p.dist.lo, p.dist.hi
                if np.any(col < lo) or np.any(col > hi):
                    raise PreconditionError(
                        f"parameter {p.name!r}: value outside support [{lo}, {hi}]")
                out[:, j] = 2.0 * (col - lo) / (hi - lo) - 1.0
            else:
                out[:, j] = (col - p.dist.mean) / p.dist.stddev
        return out[0] if single else out

    def to_physical(self, xi) -> np.ndarray:
        """Inverse of :meth:`to_standard`; exact on the support up to rounding."""
        xi = np.asarray(xi, dtype=float)
        single = xi.ndim == 1
        pts = np.atleast_2d(xi)
        if pts.shape[1] != self.dim:
            raise PreconditionError(f"expected {self.dim} coordinates, got {pts.shape[1]}")
        out = np.empty_like(pts)
        for j, p in enumerate(self._params):
            col = pts[:, j]
            if isinstance(p.dist, Uniform):
                if np.any(col < -1.0) or np.any(col > 1.0):
                    raise PreconditionError(
                        f"parameter {p.name!r}: standard coordinate outside [-1, 1]")
                lo, hi = p.dist.lo, p.dist.hi
                out[:, j] = lo + 0.5 * (col + 1.0) * (hi - lo)
            else:
                out[:, j] = p.dist.mean + p.dist.stddev * col
        return out[0] if single else out


def _parse_kv(parts, name, lineno):
    kv = {}
    for part in parts:
        if "=" not in part:
            raise ConfigError(f"line {lineno}: parameter {name!r}: expected key=value, got {part!r}")
        key, _, val = part.partition("=")
        key = key.strip().lower()
        if key in kv:
            raise ConfigError(f"line {lineno}: parameter {name!r}: duplicate key {key!r}")
        kv[key] = val.strip()
    return kv


def _parse_float(kv, key, name, lineno):
    raw = kv.pop(key)
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: parameter {name!r}: bad number for {key}: {raw!r}") from None


def parse_space(text: str) -> ParameterSpace:
    """Parse a parameter-space config.

    One parameter per line::

        name, uniform, lo=0.1, hi=0.9
        name, uniform, mean=904388, unc=5%      # symmetric interval about the mean
        name, normal, mean=0, std=1

    An optional ``unit=...`` key is carried through for reporting. ``#``
    starts a comment; blank lines are ignored. Percent uncertainties expand
    to Uniform(mean*(1-u/100), mean*(1+u/100)).
    """
    params = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 3:
            raise ConfigError(f"line {lineno}: expected 'name, kind, key=value, ...', got {raw!r}")
        name, kind = parts[0], parts[1].lower()
        if not name:
            raise ConfigError(f"line {lineno}: empty parameter name")
        if name in seen:
            raise ConfigError(f"line {lineno}: duplicate parameter name {name!r}")
        seen.add(name)
        kv = _parse_kv(parts[2:], name, lineno)
        unit = kv.pop("unit", "")
        try:
            if kind == "uniform":
                if "lo" in kv and "hi" in kv:
                    lo = _parse_float(kv, "lo", name, lineno)
                    hi = _parse_float(kv, "hi", name, lineno)
                elif "mean" in kv and "unc" in kv:
                    mean = _parse_float(kv, "mean", name, lineno)
                    raw_unc = kv.pop("unc")
                    try:
                        unc = float(raw_unc.rstrip("%").strip())
                    except ValueError:
                        raise ConfigError(
                            f"line {lineno}: parameter {name!r}: bad percentage {raw_unc!r}") from None
                    lo = mean * (1.0 - unc / 100.0)
                    hi = mean * (1.0 + unc / 100.0)
                else:
                    raise ConfigError(
                        f"line {lineno}: parameter {name!r}: uniform needs lo=,hi= or mean=,unc=")
                dist = Uniform(lo, hi)
            elif kind == "normal":
                if "mean" not in kv or "std" not in kv:
                    raise ConfigError(
                        f"line {lineno}: parameter {name!r}: normal needs mean=,std=")
                mean = _parse_float(kv, "mean", name, lineno)
                std = _parse_float(kv, "std", name, lineno)
                dist = Normal(mean, std)
            else:
                raise ConfigError(
                    f"line {lineno}: parameter {name!r}: unknown distribution kind {kind!r}")
        except ConfigError as err:
            # re-wrap invariant violations from the dataclass validators with location info
            if "line" not in str(err):
                raise ConfigError(f"line {lineno}: parameter {name!r}: {err}") from None
            raise
        if kv:
            raise ConfigError(
                f"line {lineno}: parameter {name!r}: unexpected keys {sorted(kv)}")
        params.append(Parameter(name, dist, unit))
    return ParameterSpace(params)


def load_space(path) -> ParameterSpace:
    """Read and parse a parameter-space config file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_space(fh.read())


def format_space(space: ParameterSpace) -> str:
    """Render a space back into config-file syntax at full precision."""
    lines = []
    for p in space:
        unit = f", unit={p.unit}" if p.unit else ""
        if isinstance(p.dist, Uniform):
            lines.append(f"{p.name}, uniform, lo={p.dist.lo!r}, hi={p.dist.hi!r}{unit}")
        else:
            lines.append(f"{p.name}, normal, mean={p.dist.mean!r}, std={p.dist.stddev!r}{unit}")
    return "\n".join(lines) + "\n"
