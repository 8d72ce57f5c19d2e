"""Versioned text serialization for fitted surrogate models.

One plain-text, line-oriented format covers chaos expansions, Kriging and
PC-Kriging. Floats are written with repr(), which round-trips doubles
exactly, so files are stable across platforms. A model-set container stores
the per-output-column models of a vector-valued response in one file.

Kriging factorizations are not stored; loading refits the cached solves from
the stored design, responses and kernel, which reproduces the same numbers
deterministically.
"""

from __future__ import annotations

import numpy as np

from . import chaos, kriging, pck
from .errors import PreconditionError
from .input_space import format_space, parse_space

MAGIC = "uqforge-model v1"
SET_MAGIC = "uqforge-model-set v1"


def _fmt_vector(v) -> str:
    return " ".join(repr(float(x)) for x in np.asarray(v, dtype=float).ravel())


def _fmt_matrix_lines(M) -> list[str]:
    return [_fmt_vector(row) for row in np.atleast_2d(np.asarray(M, dtype=float))]


def _indices_lines(basis: chaos.BasisSet) -> list[str]:
    lines = ["families: " + " ".join(basis.families), "indices:"]
    lines += [" ".join(str(d) for d in b) for b in basis.indices]
    lines.append("end-indices")
    return lines


def dumps(model, label: str = "y") -> str:
    """Serialize one fitted model (PceModel, KrigingModel or PckModel)."""
    lines = [MAGIC]
    if isinstance(model, chaos.PceModel):
        lines.append("kind: pce")
        lines.append(f"label: {label}")
        lines.append("space:")
        lines.append(format_space(model.space).rstrip("\n"))
        lines.append("end-space")
        lines += _indices_lines(model.basis)
        lines.append("coeffs: " + _fmt_vector(model.coeffs))
        lines.append(f"diagnostics: residual={model.residual_norm!r} "
                     f"condition={model.condition!r} loo={model.loo_error!r}")
    elif isinstance(model, (pck.PckModel, kriging.KrigingModel)):
        if isinstance(model, pck.PckModel):
            lines.append("kind: pck")
            lines.append(f"label: {label}")
            lines.append(f"order: {model.order}")
            lines.append("space:")
            lines.append(format_space(model.space).rstrip("\n"))
            lines.append("end-space")
            krig = model.krig
        else:
            lines.append("kind: kriging")
            lines.append(f"label: {label}")
            krig = model
        lines.append(f"kernel: {krig.kernel.family}")
        lines.append("theta: " + _fmt_vector(krig.kernel.theta))
        lines.append(f"nugget: {krig.kernel.nugget!r}")
        lines.append(f"trend: {krig.trend.kind}")
        if krig.trend.kind == "pce":
            lines += _indices_lines(krig.trend.basis)
        lines.append("X:")
        lines += _fmt_matrix_lines(krig.X)
        lines.append("end-X")
        lines.append("y: " + _fmt_vector(krig.y))
        lines.append("beta: " + _fmt_vector(krig.beta))
        lines.append(f"sigma2: {krig.sigma2!r}")
    else:
        raise PreconditionError(f"cannot serialize object of type {type(model).__name__}")
    return "\n".join(lines) + "\n"


class _Reader:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise PreconditionError("unexpected end of model text")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect(self, key: str) -> str:
        line = self.next()
        if not line.startswith(key + ":"):
            raise PreconditionError(f"expected {key!r} line, got {line!r}")
        return line[len(key) + 1:].strip()

    def peek(self) -> str:
        return self.lines[self.pos] if self.pos < len(self.lines) else ""

    def block_until(self, terminator: str) -> list[str]:
        out = []
        while True:
            line = self.next()
            if line.strip() == terminator:
                return out
            out.append(line)


def _read_basis(rd: _Reader) -> chaos.BasisSet:
    families = tuple(rd.expect("families").split())
    if rd.next().strip() != "indices:":
        raise PreconditionError("expected 'indices:' block")
    rows = rd.block_until("end-indices")
    indices = tuple(tuple(int(t) for t in row.split()) for row in rows)
    return chaos.BasisSet(families, indices)


def _read_space(rd: _Reader):
    if rd.next().strip() != "space:":
        raise PreconditionError("expected 'space:' block")
    return parse_space("\n".join(rd.block_until("end-space")))


def _vector(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split()], dtype=float)


def loads(text: str):
    """Parse one serialized model; returns (label, model)."""
    rd = _Reader(text)
    if rd.next().strip() != MAGIC:
        raise PreconditionError(f"not a {MAGIC!r} document")
    kind = rd.expect("kind")
    label = rd.expect("label")
    if kind == "pce":
        space = _read_space(rd)
        basis = _read_basis(rd)
        coeffs = _vector(rd.expect("coeffs"))
        diag = dict(tok.split("=") for tok in rd.expect("diagnostics").split())
        model = chaos.PceModel(space, basis, coeffs,
                               residual_norm=float(diag["residual"]),
                               condition=float(diag["condition"]),
                               loo_error=float(diag["loo"]))
        return label, model
    if kind in ("kriging", "pck"):
        order = None
        space = None
        if kind == "pck":
            order = int(rd.expect("order"))
            space = _read_space(rd)
        family = rd.expect("kernel")
        theta = _vector(rd.expect("theta"))
        nugget = float(rd.expect("nugget"))
        trend_kind = rd.expect("trend")
        if trend_kind == "pce":
            trend = kriging.pce_trend(_read_basis(rd))
        elif trend_kind == "linear":
            trend = kriging.linear_trend(len(theta))
        else:
            trend = kriging.constant_trend(len(theta))
        if rd.next().strip() != "X:":
            raise PreconditionError("expected 'X:' block")
        X = np.array([[float(t) for t in row.split()] for row in rd.block_until("end-X")])
        y = _vector(rd.expect("y"))
        _beta = _vector(rd.expect("beta"))
        _sigma2 = float(rd.expect("sigma2"))
        kernel = kriging.Kernel(family, theta, nugget)
        krig = kriging.fit_given_theta(X, y, kernel, trend)
        if kind == "pck":
            return label, pck.PckModel(krig, space, order)
        return label, krig
    raise PreconditionError(f"unknown model kind {kind!r}")


def save_models(path, labeled_models) -> None:
    """Write a sequence of (label, model) pairs into one model-set file."""
    labeled_models = list(labeled_models)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(SET_MAGIC + "\n")
        fh.write(f"count: {len(labeled_models)}\n")
        for label, model in labeled_models:
            fh.write(f"=== model {label}\n")
            fh.write(dumps(model, label))


def load_models(path) -> list:
    """Read a model-set file back into (label, model) pairs."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    lines = text.splitlines()
    if not lines or lines[0].strip() != SET_MAGIC:
        raise PreconditionError(f"{path}: not a {SET_MAGIC!r} file")
    count = int(lines[1].split(":")[1])
    chunks = []
    current = None
    for line in lines[2:]:
        if line.startswith("=== model "):
            if current is not None:
                chunks.append(current)
            current = []
        elif current is not None:
            current.append(line)
    if current is not None:
        chunks.append(current)
    if len(chunks) != count:
        raise PreconditionError(f"{path}: header says {count} models, found {len(chunks)}")
    return [loads("\n".join(chunk)) for chunk in chunks]
