"""Variance-based global sensitivity analysis by pick-and-freeze Monte Carlo.

The campaign evaluates the model on two quasi-random blocks A and B plus the
n column-substituted blocks AB_i, for a total budget of base_count*(n+2)
evaluations. First-order indices use the Saltelli estimator, total indices
the lower-variance Jansen estimator. Estimates are reported raw: small
negative values are honest Monte Carlo noise, and clamping them would hide
estimator bias.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import doe
from .errors import PreconditionError
from .input_space import ParameterSpace


@dataclass
class SobolIndices:
    """First-order and total sensitivity indices per input."""

    first_order: np.ndarray
    total: np.ndarray
    evaluation_count: int
    estimator: str
    zero_variance: bool = False

    @property
    def dim(self) -> int:
        return len(self.first_order)


def saltelli_sobol(evaluable, space: ParameterSpace, base_count: int,
                   seed: int = 0) -> SobolIndices:
    """Estimate Sobol' indices of a black-box model over the input space.

    Parameters
    ----------
    evaluable : callable
        Vectorized model: takes an (k, n) array of physical points, returns
        a length-k array of scalar responses.
    space : ParameterSpace
        Input definition; also fixes the index order of the result.
    base_count : int
        Rows per block; total evaluations are base_count * (n + 2).
    seed : int
        Selects the quasi-random block: the A/B pair comes from a
        2n-dimensional Sobol sequence (first n columns form A, last n form
        B) starting at raw offset seed * base_count.

    Zero output variance yields all-zero indices with ``zero_variance`` set.
    """
    if base_count < 64:
        raise PreconditionError("saltelli_sobol: base_count must be >= 64")
    n = space.dim
    block = doe.sobol_sequence(2 * n, base_count, skip=seed * base_count).points
    a_unit = doe.DesignMatrix(block[:, :n], "unit", {"kind": "sobol"})
    b_unit = doe.DesignMatrix(block[:, n:], "unit", {"kind": "sobol"})
    A = doe.scale(a_unit, space).points
    B = doe.scale(b_unit, space).points

    stack = np.empty(((n + 2) * base_count, n))
    stack[:base_count] = A
    stack[base_count:2 * base_count] = B
    for i in range(n):
        ab = A.copy()
        ab[:, i] = B[:, i]
        stack[(2 + i) * base_count:(3 + i) * base_count] = ab
    values = np.asarray(evaluable(stack), dtype=float).ravel()
    if values.shape[0] != stack.shape[0]:
        raise PreconditionError("evaluable returned the wrong number of responses")

    fa = values[:base_count]
    fb = values[base_count:2 * base_count]
    combined = np.concatenate([fa, fb])
    mu, var = float(np.mean(combined)), float(np.var(combined))
    first = np.zeros(n)
    total = np.zeros(n)
    zero_variance = var <= 1e-24 * max(1.0, mu ** 2)
    if not zero_variance:
        # center and scale before forming products; with a mean much larger
        # than the spread the raw pick-and-freeze products are dominated by
        # mean cross terms and the first-order estimate degrades badly
        sd = np.sqrt(var)
        ga = (fa - mu) / sd
        gb = (fb - mu) / sd
        for i in range(n):
            fab = values[(2 + i) * base_count:(3 + i) * base_count]
            gab = (fab - mu) / sd
            first[i] = np.mean(gb * (gab - ga))
            total[i] = 0.5 * np.mean((ga - gab) ** 2)
    return SobolIndices(first_order=first, total=total,
                        evaluation_count=base_count * (n + 2),
                        estimator="saltelli-jansen", zero_variance=zero_variance)


@dataclass
class SobolComparison:
    """Side-by-side table of Monte Carlo vs expansion-extracted indices."""

    names: tuple[str, ...]
    s1_mc: np.ndarray
    st_mc: np.ndarray
    s1_pce: np.ndarray
    st_pce: np.ndarray
    tolerance: float

    @property
    def delta(self) -> np.ndarray:
        return np.maximum(np.abs(self.s1_mc - self.s1_pce),
                          np.abs(self.st_mc - self.st_pce))

    @property
    def disagreements(self) -> list[str]:
        return [name for name, d in zip(self.names, self.delta) if d > self.tolerance]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("input,S1,ST,S1_pce,ST_pce,delta\n")
            for i, name in enumerate(self.names):
                fh.write(f"{name},{self.s1_mc[i]:.17g},{self.st_mc[i]:.17g},"
                         f"{self.s1_pce[i]:.17g},{self.st_pce[i]:.17g},{self.delta[i]:.17g}\n")

    def __str__(self):
        width = max(len(n) for n in self.names)
        lines = [f"{'input':<{width}}  {'S1':>9} {'ST':>9} {'S1_pce':>9} {'ST_pce':>9} {'delta':>9}"]
        for i, name in enumerate(self.names):
            flag = "  <-- disagrees" if self.delta[i] > self.tolerance else ""
            lines.append(f"{name:<{width}}  {self.s1_mc[i]:9.4f} {self.st_mc[i]:9.4f} "
                         f"{self.s1_pce[i]:9.4f} {self.st_pce[i]:9.4f} {self.delta[i]:9.4f}{flag}")
        return "\n".join(lines)


def sobol_compare(pce_model, mc: SobolIndices, tolerance: float = 0.05) -> SobolComparison:
    """Tabulate expansion-extracted indices against Monte Carlo estimates.

    ``pce_model`` must expose ``sobol()`` and a ``space``; disagreements
    beyond ``tolerance`` (per input, either index) are flagged in the report.
    """
    extracted = pce_model.sobol()
    if extracted.dim != mc.dim:
        raise PreconditionError("index dimension mismatch between the two routes")
    return SobolComparison(names=pce_model.space.names,
                           s1_mc=mc.first_order, st_mc=mc.total,
                           s1_pce=extracted.first_order, st_pce=extracted.total,
                           tolerance=tolerance)
