"""HiGHS back end through scipy.optimize.milp."""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .model import Limits, LinearModel, SolveResult, Status

_STATUS = {0: Status.OPTIMAL, 1: Status.ITERATION_LIMIT, 2: Status.INFEASIBLE,
           3: Status.UNBOUNDED, 4: Status.ITERATION_LIMIT}


def highs_solve(model: LinearModel, limits: Limits | None = None, relax: bool = False) -> SolveResult:
    limits = limits or Limits()
    c, A, (rlo, rhi), lb, ub, integer = model.arrays()
    if relax:
        integer = np.zeros_like(integer)
    constraints = [LinearConstraint(A, rlo, rhi)] if model.num_rows else []
    # the bundled HiGHS presolve can return suboptimal MILP points; keep it for LPs only
    options = {"mip_rel_gap": limits.rel_gap, "presolve": not integer.any()}
    if math.isfinite(limits.time_limit):
        options["time_limit"] = limits.time_limit
    if integer.any():
        options["node_limit"] = limits.max_nodes
    res = milp(c, constraints=constraints, integrality=integer.astype(int),
               bounds=Bounds(lb, ub), options=options)
    status = _STATUS.get(res.status, Status.ITERATION_LIMIT)
    if res.x is None:
        if status == Status.OPTIMAL:
            status = Status.ITERATION_LIMIT
        return SolveResult(status)
    x = np.asarray(res.x, dtype=float)
    if integer.any():
        x[integer] = np.round(x[integer])
    objective = float(c @ x) + model.offset
    bound = getattr(res, "mip_dual_bound", None)
    return SolveResult(status, objective, x, bound=float(bound) + model.offset if bound is not None else math.nan)
