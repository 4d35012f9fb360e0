"""Sparse linear model container shared by all solver back ends."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

INF = math.inf


class SolverError(ValueError):
    pass


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


LE, GE, EQ = "<=", ">=", "="


@dataclass
class SolveResult:
    status: Status
    objective: float = math.nan
    x: np.ndarray | None = None
    iterations: int = 0
    nodes: int = 0
    bound: float = math.nan
    basis: tuple | None = None  # (column status, basic columns) for warm starts

    @property
    def ok(self) -> bool:
        return self.status == Status.OPTIMAL


@dataclass
class Limits:
    max_nodes: int = 200_000
    time_limit: float = math.inf
    gap_tol: float = 1e-6
    rel_gap: float = 1e-9


@dataclass
class LinearModel:
    """min c.x + offset subject to sparse rows and variable bounds."""

    name: str = "model"
    var_names: list[str] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    obj: list[float] = field(default_factory=list)
    integer: list[bool] = field(default_factory=list)
    row_idx: list[np.ndarray] = field(default_factory=list)
    row_val: list[np.ndarray] = field(default_factory=list)
    senses: list[str] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)
    offset: float = 0.0

    @property
    def num_vars(self) -> int:
        return len(self.lb)

    @property
    def num_rows(self) -> int:
        return len(self.rhs)

    def add_var(self, name: str = "", lb: float = 0.0, ub: float = INF, obj: float = 0.0,
                integer: bool = False) -> int:
        if lb > ub:
            raise SolverError(f"variable {name!r}: lb > ub")
        if math.isnan(lb) or math.isnan(ub) or math.isnan(obj):
            raise SolverError(f"variable {name!r}: NaN data")
        k = len(self.lb)
        self.var_names.append(name or f"x{k}")
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.obj.append(float(obj))
        self.integer.append(bool(integer))
        return k

    def add_binary(self, name: str = "", obj: float = 0.0) -> int:
        return self.add_var(name, 0.0, 1.0, obj, integer=True)

    def add_row(self, indices: Sequence[int], coefs: Sequence[float], sense: str, rhs: float,
                name: str = "") -> int:
        if sense not in (LE, GE, EQ):
            raise SolverError(f"unknown sense {sense!r}")
        idx = np.asarray(indices, dtype=np.int64)
        val = np.asarray(coefs, dtype=float)
        if idx.shape != val.shape:
            raise SolverError("row indices and coefficients differ in length")
        if idx.size and (idx.min() < 0 or idx.max() >= len(self.lb)):
            raise SolverError(f"row {name!r} references an undeclared variable")
        if math.isnan(rhs):
            raise SolverError(f"row {name!r}: NaN rhs")
        k = len(self.rhs)
        self.row_idx.append(idx)
        self.row_val.append(val)
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.row_names.append(name or f"r{k}")
        return k

    def add_obj(self, var: int, coef: float) -> None:
        self.obj[var] += float(coef)

    def copy(self) -> "LinearModel":
        return LinearModel(self.name, list(self.var_names), list(self.lb), list(self.ub),
                           list(self.obj), list(self.integer), list(self.row_idx),
                           list(self.row_val), list(self.senses), list(self.rhs),
                           list(self.row_names), self.offset)

    # array views -------------------------------------------------------
    def matrix(self) -> sp.csr_matrix:
        m, n = self.num_rows, self.num_vars
        if m == 0:
            return sp.csr_matrix((0, n))
        lens = [len(r) for r in self.row_idx]
        indptr = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
        indices = np.concatenate(self.row_idx) if indptr[-1] else np.zeros(0, dtype=np.int64)
        data = np.concatenate(self.row_val) if indptr[-1] else np.zeros(0)
        mat = sp.csr_matrix((data, indices, indptr), shape=(m, n))
        mat.sum_duplicates()
        return mat

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        rhs = np.asarray(self.rhs, dtype=float)
        sense = np.asarray(self.senses)
        lo = np.where(sense == LE, -INF, rhs)
        hi = np.where(sense == GE, INF, rhs)
        return lo, hi

    def arrays(self):
        return (np.asarray(self.obj, dtype=float), self.matrix(), self.row_bounds(),
                np.asarray(self.lb, dtype=float), np.asarray(self.ub, dtype=float),
                np.asarray(self.integer, dtype=bool))

    def check_solution(self, x: np.ndarray, tol: float = 1e-6, integral: bool = False) -> list[str]:
        """Human-readable violations of bounds, rows and (optionally) integrality."""
        issues = []
        x = np.asarray(x, dtype=float)
        if x.shape != (self.num_vars,):
            return [f"dimension mismatch: {x.shape} vs {self.num_vars}"]
        lb, ub = np.asarray(self.lb), np.asarray(self.ub)
        for k in np.nonzero((x < lb - tol) | (x > ub + tol))[0][:5]:
            issues.append(f"bound {self.var_names[k]}: {x[k]} not in [{lb[k]}, {ub[k]}]")
        if self.num_rows:
            act = self.matrix() @ x
            lo, hi = self.row_bounds()
            scale = 1.0 + np.abs(np.asarray(self.rhs))
            bad = np.nonzero((act < lo - tol * scale) | (act > hi + tol * scale))[0]
            for k in bad[:5]:
                issues.append(f"row {self.row_names[k]}: activity {act[k]} vs [{lo[k]}, {hi[k]}]")
        if integral:
            ints = np.asarray(self.integer)
            frac = np.abs(x - np.round(x))
            for k in np.nonzero(ints & (frac > 1e-6))[0][:5]:
                issues.append(f"integrality {self.var_names[k]}: {x[k]}")
        return issues

    def objective_value(self, x: np.ndarray) -> float:
        return float(np.dot(np.asarray(self.obj), x) + self.offset)
