"""LP/MILP engine: native simplex plus branch and bound, with a HiGHS plug point."""
from __future__ import annotations


from .bnb import mip_solve
from .lpformat import write_lp
from .model import EQ, GE, INF, LE, Limits, LinearModel, SolveResult, SolverError, Status
from .simplex import SimplexOptions, lp_solve

BACKENDS = ("native", "highs")


def solve(model: LinearModel, backend: str = "native", limits: Limits | None = None) -> SolveResult:
    """Dispatch to a back end; MILP when any integrality flag is set."""
    if backend == "native":
        if any(model.integer):
            return mip_solve(model, limits)
        return lp_solve(model)
    if backend == "highs":
        from .highs import highs_solve
        return highs_solve(model, limits)
    raise SolverError(f"unknown backend {backend!r}; choose from {BACKENDS}")


__all__ = ["EQ", "GE", "INF", "LE", "BACKENDS", "Limits", "LinearModel", "SimplexOptions",
           "SolveResult", "SolverError", "Status", "lp_solve", "mip_solve", "solve", "write_lp"]
