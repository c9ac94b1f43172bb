"""LP engines behind a small column-oriented contract.

An engine solves ``max c.x  s.t.  A x = b,  x >= 0`` where columns of ``A`` can
be appended between solves.  ``solve`` returns the primal vector over all
columns added so far and the equality-row duals ``y`` of the maximization
problem, so that the reduced profit of a column ``a`` with cost ``c_a`` is
``c_a - a.y`` and the dual objective is ``b.y``.
"""

from __future__ import annotations

from dataclasses import dataclass

import highspy
import numpy as np
import scipy
from scipy.optimize import linprog
from scipy.sparse import csc_matrix, hstack


class LpSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    y: np.ndarray
    feasible: bool


class HighsColumnLp:
    """HiGHS through ``highspy``; appended columns are warm-started from the previous basis."""

    name = "highs-{}.{}.{}/simplex".format(
        highspy.HIGHS_VERSION_MAJOR, highspy.HIGHS_VERSION_MINOR, highspy.HIGHS_VERSION_PATCH
    )

    def __init__(self, rhs, tol: float = 1e-9):
        self._h = h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("primal_feasibility_tolerance", tol)
        h.setOptionValue("dual_feasibility_tolerance", tol)
        h.setOptionValue("presolve", "off")
        rhs = np.asarray(rhs, dtype=float)
        empty_i = np.array([], dtype=np.int32)
        h.addRows(len(rhs), rhs, rhs, 0, empty_i, empty_i, np.array([], dtype=float))
        h.changeObjectiveSense(highspy.ObjSense.kMaximize)
        self.n_cols = 0

    def add_columns(self, cols, costs) -> None:
        cols = csc_matrix(np.asarray(cols, dtype=float))
        n = cols.shape[1]
        self._h.addCols(
            n,
            np.asarray(costs, dtype=float),
            np.zeros(n),
            np.full(n, highspy.kHighsInf),
            cols.nnz,
            cols.indptr[:-1].astype(np.int32),
            cols.indices.astype(np.int32),
            cols.data,
        )
        self.n_cols += n

    def solve(self) -> LpSolution:
        h = self._h
        h.run()
        status = h.getModelStatus()
        if status == highspy.HighsModelStatus.kInfeasible:
            return LpSolution(np.zeros(self.n_cols), np.zeros(h.getNumRow()), False)
        if status != highspy.HighsModelStatus.kOptimal:
            raise LpSolverError(f"HiGHS returned {h.modelStatusToString(status)}")
        sol = h.getSolution()
        return LpSolution(np.array(sol.col_value), np.array(sol.row_dual), True)


class ScipyColumnLp:
    """``scipy.optimize.linprog``, re-solved from scratch; ``method`` picks the HiGHS algorithm."""

    def __init__(self, rhs, tol: float = 1e-9, method: str = "highs-ipm"):
        self.rhs = np.asarray(rhs, dtype=float)
        self.method = method
        self.tol = tol
        self.name = f"scipy-{scipy.__version__}/{method}"
        self._cols = []
        self._costs = []
        self.n_cols = 0

    def add_columns(self, cols, costs) -> None:
        self._cols.append(csc_matrix(np.asarray(cols, dtype=float)))
        self._costs.append(np.asarray(costs, dtype=float))
        self.n_cols += self._cols[-1].shape[1]

    def solve(self) -> LpSolution:
        A = hstack(self._cols, format="csc")
        c = np.concatenate(self._costs)
        res = linprog(
            -c,
            A_eq=A,
            b_eq=self.rhs,
            bounds=(0, None),
            method=self.method,
            options={"primal_feasibility_tolerance": self.tol, "dual_feasibility_tolerance": self.tol},
        )
        if res.status == 2:
            return LpSolution(np.zeros(self.n_cols), np.zeros(len(self.rhs)), False)
        if res.status != 0:
            raise LpSolverError(f"linprog failed (status {res.status}): {res.message}")
        # marginals are d(min -c.x)/db; negate for the maximization duals
        return LpSolution(res.x, -res.eqlin.marginals, True)
