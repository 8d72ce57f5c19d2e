"""Black-box model interface: built-in benchmarks and an external-command runner.

Built-ins
---------
* ``ishigami`` -- the classic three-input sensitivity benchmark on U(-pi, pi)^3.
* ``nozzle_q1d`` -- a quasi-1D isentropic ideal-gas converging-diverging nozzle.
  The duct is 0.123 m long with a 0.036 m inlet height and a 0.0084 m throat
  height; the area tapers linearly down to the throat at 40% of the length and
  then linearly up to an exit area sized so that the flow leaves at Mach 1.5
  for the nominal heat-capacity ratio 1.01767. Inputs follow the seven-column
  layout [p0, T0, gamma, R, mu, K_T, omega]; the last three are accepted but
  have no influence on an inviscid ideal-gas flow, which makes them a known
  zero for sensitivity checks.

External models are invoked once per design row in a fresh scratch directory:
the runner writes an input CSV (header of names, one data row at full
precision), executes the command, and reads back an output CSV (header of
labels, one data row). Failed rows are masked, not fatal, unless every row
fails.
"""

from __future__ import annotations

import csv
import os
import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .doe import DesignMatrix
from .errors import ExternalModelError, PreconditionError

# Nozzle geometry (meters). Half heights of the upper contour; the duct is
# symmetric about the centerline and area per unit depth is 2*h(x).
NOZZLE_LENGTH = 0.123
NOZZLE_INLET_HALF_HEIGHT = 0.018
NOZZLE_THROAT_HALF_HEIGHT = 0.0042
NOZZLE_THROAT_POS = 0.4 * NOZZLE_LENGTH
NOZZLE_DESIGN_EXIT_MACH = 1.5
NOZZLE_DESIGN_GAMMA = 1.01767

NOZZLE_FIELDS = ("p", "T", "M", "rho")
NOZZLE_INPUT_NAMES = ("InletPressure", "InletTemperature", "GammaValue",
                      "GasConstant", "Mu", "KT", "AcentricFactor")


def ishigami(x, a: float = 7.0, b: float = 0.1):
    """sin(x1) + a*sin^2(x2) + b*x3^4*sin(x1), vectorized over leading axes."""
    x = np.asarray(x, dtype=float)
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    return np.sin(x1) + a * np.sin(x2) ** 2 + b * x3 ** 4 * np.sin(x1)


def area_ratio(mach, gamma):
    """A/A* of isentropic quasi-1D flow at the given Mach number."""
    mach = np.asarray(mach, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    gm1 = gamma - 1.0
    t = (2.0 / (gamma + 1.0)) * (1.0 + 0.5 * gm1 * mach ** 2)
    return (1.0 / mach) * t ** ((gamma + 1.0) / (2.0 * gm1))


def mach_from_area_ratio(ar, gamma, supersonic):
    """Invert the area-Mach relation on one branch by bisection.

    ``ar``, ``gamma`` and the boolean ``supersonic`` broadcast together.
    The bracket is [1e-6, 1] on the subsonic branch and [1, 20] on the
    supersonic branch; bisection runs until the bracket collapses to
    floating-point resolution, so the residual in A/A* is at rounding level
    (well below 1e-12) everywhere the relation is invertible.
    """
    ar, gamma, supersonic = np.broadcast_arrays(
        np.asarray(ar, dtype=float), np.asarray(gamma, dtype=float),
        np.asarray(supersonic, dtype=bool))
    if np.any(ar < 1.0 - 1e-12):
        raise PreconditionError("area ratio below 1 has no isentropic solution")
    lo = np.where(supersonic, 1.0, 1e-6)
    hi = np.where(supersonic, 20.0, 1.0)
    # f(M) = A/A*(M) - target; decreasing on (0,1], increasing on [1,inf)
    sgn = np.where(supersonic, 1.0, -1.0)
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        f = sgn * (area_ratio(mid, gamma) - ar)
        above = f > 0.0
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    mach = 0.5 * (lo + hi)
    return np.where(np.abs(ar - 1.0) <= 1e-12, 1.0, mach)


def nozzle_half_height(x):
    """Piecewise-linear contour half height at axial position x."""
    x = np.asarray(x, dtype=float)
    conv = NOZZLE_INLET_HALF_HEIGHT + (NOZZLE_THROAT_HALF_HEIGHT - NOZZLE_INLET_HALF_HEIGHT) \
        * (x / NOZZLE_THROAT_POS)
    exit_h = NOZZLE_THROAT_HALF_HEIGHT * float(
        area_ratio(NOZZLE_DESIGN_EXIT_MACH, NOZZLE_DESIGN_GAMMA))
    div = NOZZLE_THROAT_HALF_HEIGHT + (exit_h - NOZZLE_THROAT_HALF_HEIGHT) \
        * ((x - NOZZLE_THROAT_POS) / (NOZZLE_LENGTH - NOZZLE_THROAT_POS))
    return np.where(x < NOZZLE_THROAT_POS, conv, div)


def nozzle_stations(count: int) -> np.ndarray:
    """Equispaced centerline stations over the full nozzle length."""
    if count < 2:
        raise PreconditionError("need at least 2 stations")
    return np.linspace(0.0, NOZZLE_LENGTH, count)


def nozzle_labels(count: int) -> list[str]:
    """Output labels, all stations of one field before the next field."""
    return [f"{f}_{i:03d}" for f in NOZZLE_FIELDS for i in range(count)]


def nozzle_batch(X, stations: int = 50) -> np.ndarray:
    """Evaluate the nozzle model on an (N, 7) physical matrix; returns (N, 4S).

    Per row: solve the area-Mach relation at every station (subsonic branch
    upstream of the throat, supersonic downstream, exactly sonic at the
    throat), then apply the stagnation relations for T and p and the ideal
    gas law for rho. Columns are ordered [p..., T..., M..., rho...].
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != 7:
        raise PreconditionError(f"nozzle expects 7 inputs, got {X.shape[1]}")
    p0, t0, gamma, rgas = X[:, 0], X[:, 1], X[:, 2], X[:, 3]
    if np.any(gamma <= 1.0) or np.any(rgas <= 0.0) or np.any(t0 <= 0.0) or np.any(p0 <= 0.0):
        raise PreconditionError("nozzle requires gamma > 1 and positive p0, T0, R")
    x = nozzle_stations(stations)
    ar = nozzle_half_height(x) / NOZZLE_THROAT_HALF_HEIGHT
    at_throat = np.abs(x - NOZZLE_THROAT_POS) <= 1e-9
    supersonic = x > NOZZLE_THROAT_POS

    mach = mach_from_area_ratio(ar[None, :], gamma[:, None], supersonic[None, :])
    mach = np.where(at_throat[None, :], 1.0, mach)
    gm1 = (gamma - 1.0)[:, None]
    core = 1.0 + 0.5 * gm1 * mach ** 2
    temp = t0[:, None] / core
    pres = p0[:, None] * core ** (-gamma[:, None] / gm1)
    rho = pres / (rgas[:, None] * temp)
    return np.hstack([pres, temp, mach, rho])


def nozzle_q1d(params, stations: int = 50) -> np.ndarray:
    """Single-point nozzle evaluation; see :func:`nozzle_batch`."""
    return nozzle_batch(np.asarray(params, dtype=float)[None, :], stations)[0]


_BUILTINS = {
    # name -> (input arity, batch fn, labels fn)
    "ishigami": (3, lambda X, opt: ishigami(X)[:, None], lambda opt: ["y"]),
    "nozzle": (7,
               lambda X, opt: nozzle_batch(X, int(opt.get("stations", 50))),
               lambda opt: nozzle_labels(int(opt.get("stations", 50)))),
}


@dataclass(frozen=True)
class ModelSpec:
    """Description of an evaluable model.

    ``kind`` is "builtin" or "external". Builtins carry a registry name plus
    options; externals carry the command line, working directory, the
    input/output file names of the per-run exchange protocol and a timeout.
    """

    kind: str
    name: str = ""
    options: dict = field(default_factory=dict)
    command: str = ""
    workdir: str = "."
    input_file: str = "input.csv"
    output_file: str = "output.csv"
    timeout: float = 60.0
    output_dim: int = 1
    output_labels: tuple[str, ...] = ("y",)

    def __post_init__(self):
        if self.kind not in ("builtin", "external"):
            raise PreconditionError(f"unknown model kind {self.kind!r}")
        if self.kind == "builtin" and self.name not in _BUILTINS:
            raise PreconditionError(
                f"unknown builtin model {self.name!r}; have {sorted(_BUILTINS)}")
        if self.output_dim < 1 or len(self.output_labels) != self.output_dim:
            raise PreconditionError("output_labels length must equal output_dim")


def builtin_model(name: str, **options) -> ModelSpec:
    """ModelSpec for a registered builtin, labels and arity filled in."""
    if name not in _BUILTINS:
        raise PreconditionError(f"unknown builtin model {name!r}; have {sorted(_BUILTINS)}")
    labels = _BUILTINS[name][2](options)
    return ModelSpec(kind="builtin", name=name, options=dict(options),
                     output_dim=len(labels), output_labels=tuple(labels))


def external_model(command: str, workdir: str = ".", input_file: str = "input.csv",
                   output_file: str = "output.csv", timeout: float = 60.0,
                   output_labels=("y",)) -> ModelSpec:
    labels = tuple(output_labels)
    return ModelSpec(kind="external", command=command, workdir=workdir,
                     input_file=input_file, output_file=output_file, timeout=timeout,
                     output_dim=len(labels), output_labels=labels)


@dataclass
class ResponseSet:
    """Model outputs aligned row-for-row with a design.

    ``mask`` flags failed rows (True = failed); unmasked entries are finite.
    ``diagnostics`` keeps one message per failed row for reporting.
    """

    Y: np.ndarray
    mask: np.ndarray
    labels: tuple[str, ...]
    diagnostics: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return self.Y.shape[0]

    @property
    def output_dim(self) -> int:
        return self.Y.shape[1]

    def ok(self) -> np.ndarray:
        return ~self.mask


def _run_external_row(model: ModelSpec, row: np.ndarray, names, scratch_root) -> tuple[np.ndarray, str]:
    """One external evaluation in a private scratch directory."""
    workdir = tempfile.mkdtemp(prefix="uqforge_run_", dir=scratch_root)
    in_path = os.path.join(workdir, model.input_file)
    with open(in_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    try:
        proc = subprocess.run(shlex.split(model.command), cwd=workdir,
                              capture_output=True, text=True, timeout=model.timeout)
    except FileNotFoundError as err:
        return None, f"command not found: {err}"
    except subprocess.TimeoutExpired:
        return None, f"timeout after {model.timeout}s"
    if proc.returncode != 0:
        tail = (proc.stderr or proc.stdout or "").strip().splitlines()
        return None, f"exit status {proc.returncode}: {tail[-1] if tail else 'no output'}"
    out_path = os.path.join(workdir, model.output_file)
    try:
        with open(out_path, "r", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            _header = next(reader, None)
            data = next(reader, None)
        vals = np.array([float(v) for v in data], dtype=float)
    except (OSError, TypeError, ValueError) as err:
        return None, f"unreadable output file {model.output_file!r}: {err}"
    if vals.shape != (model.output_dim,) or not np.all(np.isfinite(vals)):
        return None, f"expected {model.output_dim} finite values, got {vals!r}"
    return vals, ""


def evaluate_batch(model: ModelSpec, design: DesignMatrix, names=None,
                   jobs: int = 1, scratch_root=None) -> ResponseSet:
    """Evaluate a model on every row of a physical-form design.

    Row order is preserved. External failures mask the affected row and file
    a diagnostic; the call raises only if every row failed.
    """
    if design.form != "physical":
        raise PreconditionError(f"evaluate_batch expects a physical design, got {design.form!r}")
    X = design.points
    if model.kind == "builtin":
        arity, batch_fn, _ = _BUILTINS[model.name]
        if design.dim != arity:
            raise PreconditionError(
                f"builtin {model.name!r} expects {arity} inputs, design has {design.dim}")
        Y = np.asarray(batch_fn(X, model.options), dtype=float)
        return ResponseSet(Y, np.zeros(X.shape[0], dtype=bool), model.output_labels)

    if names is None:
        names = [f"x{j + 1}" for j in range(design.dim)]
    if scratch_root is None:
        scratch_root = os.environ.get("UQFORGE_SCRATCH") or model.workdir
    os.makedirs(scratch_root, exist_ok=True)
    n = X.shape[0]
    Y = np.full((n, model.output_dim), np.nan)
    mask = np.ones(n, dtype=bool)
    diagnostics = []
    jobs = max(1, int(jobs))
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_external_row, model, X[i], names, scratch_root)
                   for i in range(n)]
        for i, fut in enumerate(futures):
            vals, msg = fut.result()
            if vals is None:
                diagnostics.append(f"row {i}: {msg}")
            else:
                Y[i] = vals
                mask[i] = False
    if mask.all():
        summary = "; ".join(diagnostics[:3])
        raise ExternalModelError(f"all {n} external evaluations failed ({summary})")
    return ResponseSet(Y, mask, model.output_labels, diagnostics)


def as_batch_callable(model: ModelSpec, column: int = 0, names=None):
    """Wrap a ModelSpec as f(X_physical) -> 1-D array of one output column."""
    if model.kind == "builtin":
        arity, batch_fn, _ = _BUILTINS[model.name]

        def call(X):
            return np.asarray(batch_fn(np.atleast_2d(np.asarray(X, float)), model.options))[:, column]
        return call

    def call(X):
        design = DesignMatrix(np.atleast_2d(np.asarray(X, float)), "physical")
        resp = evaluate_batch(model, design, names=names)
        if resp.mask.any():
            raise ExternalModelError("external model failed inside a sensitivity sweep")
        return resp.Y[:, column]
    return call


def save_responses(resp: ResponseSet, path, model_tag: str = "") -> None:
    """Write responses as CSV; masked rows serialize as all-nan."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        tag = f" model={model_tag}" if model_tag else ""
        fh.write(f"# responses n={resp.count} m={resp.output_dim}{tag}\n")
        fh.write(",".join(resp.labels) + "\n")
        for i in range(resp.count):
            row = resp.Y[i]
            if resp.mask[i]:
                fh.write(",".join(["nan"] * resp.output_dim) + "\n")
            else:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_responses(path) -> ResponseSet:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("# responses"):
            raise PreconditionError(f"{path}: not a responses csv")
        labels = tuple(fh.readline().strip().split(","))
        rows = [[float(tok) for tok in line.split(",")] for line in fh if line.strip()]
    Y = np.asarray(rows, dtype=float)
    mask = ~np.all(np.isfinite(Y), axis=1)
    return ResponseSet(Y, mask, labels)
