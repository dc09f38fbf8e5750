"""Dense primal simplex for ``max c.x  s.t.  A x <= b, x >= 0`` with ``b >= 0``."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-7
PIVOT_TOL = 1e-10
MAX_ITER = 100_000


class LPError(RuntimeError):
    pass


@dataclass
class LinearProgram:
    objective: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    var_names: list[str] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).reshape(-1)
        n = len(self.objective)
        self.a_ub = np.asarray(self.a_ub, dtype=float).reshape(-1, n)
        self.b_ub = np.asarray(self.b_ub, dtype=float).reshape(-1)
        if len(self.b_ub) != self.a_ub.shape[0]:
            raise ValueError("b_ub length does not match the number of rows")
        if not self.var_names:
            self.var_names = [f"x{j}" for j in range(n)]
        if not self.row_names:
            self.row_names = [f"row{i}" for i in range(len(self.b_ub))]

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    def max_violation(self, x: np.ndarray) -> float:
        viol = 0.0
        if len(self.b_ub):
            viol = float(np.max(self.a_ub @ x - self.b_ub, initial=0.0))
        return max(viol, float(np.max(-x, initial=0.0)))

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("row," + ",".join(self.var_names) + ",rhs\n")
        out.write("objective," + ",".join(f"{v:g}" for v in self.objective) + ",\n")
        for name, row, rhs in zip(self.row_names, self.a_ub, self.b_ub):
            out.write(name + "," + ",".join(f"{v:g}" for v in row) + f",{rhs:g}\n")
        return out.getvalue()


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    iterations: int


def solve_lp(lp: LinearProgram, max_iter: int = MAX_ITER) -> LPResult:
    """Solve ``lp`` from the all-slack basis using Bland's anti-cycling rule."""
    if np.any(lp.b_ub < -FEAS_TOL):
        raise LPError("right-hand sides must be non-negative (origin must be feasible)")
    m, n = lp.a_ub.shape
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = lp.a_ub
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = np.maximum(lp.b_ub, 0.0)
    tab[m, :n] = -lp.objective
    basis = list(range(n, n + m))

    it = 0
    while True:
        reduced = tab[m, :-1]
        candidates = np.flatnonzero(reduced < -FEAS_TOL * 1e-2)
        if candidates.size == 0:
            break
        if it >= max_iter:
            raise LPError(f"simplex did not converge within {max_iter} pivots")
        col = int(candidates[0])
        column = tab[:m, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            raise LPError("objective is unbounded")
        ratios = tab[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12]
        row = int(min(ties, key=lambda r: basis[r]))
        tab[row] /= tab[row, col]
        others = np.abs(tab[:, col]) > 0
        others[row] = False
        tab[others] -= np.outer(tab[others, col], tab[row])
        basis[row] = col
        it += 1

    x = np.zeros(n + m)
    for r, var in enumerate(basis):
        x[var] = tab[r, -1]
    x = x[:n]
    x[np.abs(x) < 1e-12] = 0.0
    x = np.maximum(x, 0.0)
    viol = lp.max_violation(x)
    if viol > FEAS_TOL:
        raise LPError(f"simplex returned an infeasible point (violation {viol:.3g})")
    return LPResult(x=x, objective=float(lp.objective @ x), iterations=it)
