"""Best-first branch and bound over the native simplex."""
from __future__ import annotations

import heapq
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .model import Limits, LinearModel, SolveResult, SolverError, Status
from .simplex import SimplexOptions, lp_solve

INT_TOL = 1e-6


class NodeQueue:
    """Best-bound priority queue; the only structure shared by node workers."""

    def __init__(self):
        self._heap: list = []
        self._lock = threading.Lock()
        self._seq = 0

    def push(self, bound: float, payload) -> None:
        with self._lock:
            heapq.heappush(self._heap, (bound, self._seq, payload))
            self._seq += 1

    def pop(self):
        with self._lock:
            return heapq.heappop(self._heap)

    def prune(self, cutoff: float) -> None:
        with self._lock:
            self._heap = [e for e in self._heap if e[0] < cutoff]
            heapq.heapify(self._heap)

    def min_bound(self) -> float:
        with self._lock:
            return self._heap[0][0] if self._heap else math.inf

    def __len__(self) -> int:
        with self._lock:
            return len(self._heap)


def _fractional(x: np.ndarray, ints: np.ndarray) -> tuple[int, float]:
    if not ints.size:
        return -1, 0.0
    frac = np.abs(x[ints] - np.round(x[ints]))
    k = int(np.argmax(frac))
    return (int(ints[k]), float(frac[k])) if frac[k] > INT_TOL else (-1, 0.0)


def mip_solve(model: LinearModel, limits: Limits | None = None,
              options: SimplexOptions | None = None, workers: int = 1,
              incumbent: float | None = None) -> SolveResult:
    """Minimize with integrality; branches on the most fractional variable.

    workers > 1 solves the two children of a node concurrently. The search
    order and result do not depend on it. `incumbent` is the objective of a
    known feasible point held by the caller: nodes that cannot beat it are
    pruned, and if nothing better exists the result has that objective and
    x = None.
    """
    limits = limits or Limits()
    ints = np.nonzero(np.asarray(model.integer, dtype=bool))[0]
    base_lb = np.asarray(model.lb, dtype=float)
    base_ub = np.asarray(model.ub, dtype=float)
    for k in ints:
        if not (math.isfinite(base_lb[k]) and math.isfinite(base_ub[k])):
            raise SolverError(f"integer variable {model.var_names[k]} needs finite bounds")
    lb0, ub0 = np.ceil(base_lb - INT_TOL), np.floor(base_ub + INT_TOL)
    base_lb, base_ub = base_lb.copy(), base_ub.copy()
    base_lb[ints], base_ub[ints] = lb0[ints], ub0[ints]

    start = time.monotonic()
    root = lp_solve(model, options, base_lb, base_ub)
    iters = root.iterations
    if root.status != Status.OPTIMAL:
        return SolveResult(root.status, iterations=iters, nodes=1)

    best_x, best_obj = None, math.inf if incumbent is None else float(incumbent)
    queue = NodeQueue()
    queue.push(root.objective, (base_lb, base_ub, root))
    nodes = 1
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def cutoff() -> float:
        if best_obj == math.inf:
            return math.inf
        return best_obj - max(limits.gap_tol, limits.rel_gap * abs(best_obj))

    try:
        while len(queue):
            bound, _, (lb, ub, res) = queue.pop()
            if bound >= cutoff():
                continue
            k, _ = _fractional(res.x, ints)
            if k < 0:
                x = res.x.copy()
                x[ints] = np.round(x[ints])
                best_x, best_obj = x, float(res.objective)
                queue.prune(cutoff())
                continue
            if nodes >= limits.max_nodes or time.monotonic() - start > limits.time_limit:
                queue.push(bound, (lb, ub, res))
                break
            v = res.x[k]
            down_ub = ub.copy()
            down_ub[k] = math.floor(v)
            up_lb = lb.copy()
            up_lb[k] = math.ceil(v)
            children = [(lb, down_ub), (up_lb, ub)]
            warm = res.basis
            if pool is not None:
                results = list(pool.map(lambda b: lp_solve(model, options, b[0], b[1], warm), children))
            else:
                results = [lp_solve(model, options, a, b, warm) for a, b in children]
            for (clb, cub), child in zip(children, results):
                nodes += 1
                iters += child.iterations
                if child.status == Status.OPTIMAL and child.objective < cutoff():
                    queue.push(float(child.objective), (clb, cub, child))
                elif child.status == Status.ITERATION_LIMIT:
                    raise SolverError("LP iteration limit inside branch and bound")
    finally:
        if pool is not None:
            pool.shutdown()

    remaining = queue.min_bound()
    if best_x is None and incumbent is not None:
        status = Status.OPTIMAL if remaining >= cutoff() else Status.ITERATION_LIMIT
        return SolveResult(status, best_obj, None, iterations=iters, nodes=nodes,
                           bound=min(remaining, best_obj))
    if best_x is None:
        status = Status.ITERATION_LIMIT if remaining < math.inf else Status.INFEASIBLE
        return SolveResult(status, iterations=iters, nodes=nodes, bound=remaining)
    bound = min(remaining, best_obj)
    status = Status.OPTIMAL if remaining >= cutoff() else Status.ITERATION_LIMIT
    return SolveResult(status, best_obj, best_x, iterations=iters, nodes=nodes, bound=bound)
