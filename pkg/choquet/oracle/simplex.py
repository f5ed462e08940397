"""
稠密单纯形法（两阶段，Bland 规则防循环）

求解 max c^T x  s.t.  A x ≤ b, x ≥ 0，b 可以有负分量。
"""
import logging
from dataclasses import dataclass

import numpy as np

from choquet.exceptions import ChoquetError, LpInfeasibleError, LpUnboundedError, ShapeError

logger = logging.getLogger(__name__)


@dataclass
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        m, n = self.A.shape
        if self.c.shape[0] != n or self.b.shape[0] != m:
            raise ShapeError(f"inconsistent LP shapes: c {self.c.shape}, A {self.A.shape}, b {self.b.shape}")


@dataclass
class LpSolution:
    x: np.ndarray
    objective: float
    # 原约束 A x ≤ b 的对偶变量
    duals: np.ndarray
    # b^T y - c^T x
    gap: float
    iterations: int


class _Tableau:
    """
    最后一行为目标行（约简成本），最后一列为右端项；目标行右端项为当前目标值。
    """

    def __init__(self, table: np.ndarray, basis: list, tol: float):
        self.table = table
        self.basis = basis
        self.tol = tol
        self.iterations = 0

    def pivot(self, row: int, col: int):
        T = self.table
        T[row] /= T[row, col]
        for r in range(T.shape[0]):
            if r != row and T[r, col] != 0.0:
                T[r] -= T[r, col] * T[row]
        self.basis[row] = col
        self.iterations += 1

    def run(self, columns: int, max_iter: int):
        """在前 columns 列中按 Bland 规则迭代到最优"""
        T = self.table
        m = T.shape[0] - 1
        while True:
            if self.iterations >= max_iter:
                raise ChoquetError(f"simplex did not terminate within {max_iter} pivots")
            reduced = T[m, :columns]
            entering = np.flatnonzero(reduced < -self.tol)
            if entering.size == 0:
                return
            col = int(entering[0])
            column = T[:m, col]
            candidates = np.flatnonzero(column > self.tol)
            if candidates.size == 0:
                raise LpUnboundedError(f"LP is unbounded along column {col}")
            ratios = T[candidates, -1] / column[candidates]
            best = ratios.min()
            ties = candidates[ratios <= best + self.tol * max(1.0, abs(best))]
            row = int(min(ties, key=lambda r: self.basis[r]))
            self.pivot(row, col)


def simplex_solve(lp: LinearProgram, tol: float = 1e-10, max_iter: int = 50_000) -> LpSolution:
    m, n = lp.A.shape
    flipped = lp.b < 0
    sign = np.where(flipped, -1.0, 1.0)
    artificial_rows = np.flatnonzero(flipped)
    n_art = artificial_rows.shape[0]
    width = n + m + n_art

    T = np.zeros((m + 1, width + 1))
    T[:m, :n] = lp.A * sign[:, None]
    T[:m, n:n + m] = np.diag(sign)
    T[:m, -1] = lp.b * sign
    basis = [n + i for i in range(m)]
    for k, i in enumerate(artificial_rows):
        T[i, n + m + k] = 1.0
        basis[i] = n + m + k
    tableau = _Tableau(T, basis, tol)

    # 第一阶段: max -Σ artificial
    if n_art:
        T[m, n + m:width] = 1.0
        for i in artificial_rows:
            T[m] -= T[i]
        tableau.run(width, max_iter)
        if T[m, -1] < -tol * max(1.0, np.abs(lp.b).max()):
            raise LpInfeasibleError(f"LP is infeasible (phase one optimum {T[m, -1]:.3e})")
        # 把仍在基中的人工变量换出；换不出的行是冗余约束
        redundant = []
        for i in range(m):
            if tableau.basis[i] >= n + m:
                candidates = np.flatnonzero(np.abs(T[i, :n + m]) > tol)
                if candidates.size:
                    tableau.pivot(i, int(candidates[0]))
                else:
                    redundant.append(i)
        if redundant:
            logger.debug(f"Dropping {len(redundant)} redundant constraint rows")

    # 第二阶段: 删除人工列，恢复原目标
    T = tableau.table[:, list(range(n + m)) + [width]]
    keep = [i for i in range(m) if tableau.basis[i] < n + m]
    T = T[keep + [m]]
    basis = [tableau.basis[i] for i in keep]
    T[-1] = 0.0
    T[-1, :n] = -lp.c
    for r, j in enumerate(basis):
        if j < n and lp.c[j] != 0.0:
            T[-1] += lp.c[j] * T[r]
    phase_two = _Tableau(T, basis, tol)
    phase_two.iterations = tableau.iterations
    phase_two.run(n + m, max_iter)

    x = np.zeros(n)
    for r, j in enumerate(phase_two.basis):
        if j < n:
            x[j] = T[r, -1]
    duals = T[-1, n:n + m].copy()
    # 冗余行对应的对偶变量置 0
    for i in set(range(m)) - set(keep):
        duals[i] = 0.0
    objective = float(lp.c @ x)
    gap = float(lp.b @ duals - objective)
    logger.debug(f"Simplex finished after {phase_two.iterations} pivots, objective {objective:.12g}, gap {gap:.3e}")
    return LpSolution(x=x, objective=objective, duals=duals, gap=gap, iterations=phase_two.iterations)
