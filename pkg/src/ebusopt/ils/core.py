"""Search context: cost tables, feasibility memo and objective evaluation.

Rotations are held as lists of Rotation with bus_id equal to the list
position, so (bus, position) pairs double as deterministic tie-break keys.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Iterable, Sequence

import numpy as np

from ..feasibility import energy_context, simulate
from ..model import CostParams, Instance, Rotation, SolutionState, arc_costs_milli, base_cost, to_milli
from .config import JOINT, IlsConfig

_MEMO_LIMIT = 2_000_000


def renumber(rotations: Iterable[Rotation]) -> list[Rotation]:
    return [r if r.bus_id == b else replace(r, bus_id=b) for b, r in enumerate(rotations)]


class Layout:
    """Per-trip position arrays for one rotation list."""

    def __init__(self, rotations: Sequence[Rotation], n: int):
        self.n = n
        self.bus = np.empty(n, dtype=np.int64)
        self.pos = np.empty(n, dtype=np.int64)
        self.prev = np.empty(n, dtype=np.int64)
        self.next = np.empty(n, dtype=np.int64)
        self.size = np.array([len(r.trips) for r in rotations], dtype=np.int64)
        self.first = np.array([r.trips[0] for r in rotations], dtype=np.int64)
        self.last = np.array([r.trips[-1] for r in rotations], dtype=np.int64)
        self.start = np.array([n + r.start_depot for r in rotations], dtype=np.int64)
        self.end = np.array([n + r.end_depot for r in rotations], dtype=np.int64)
        for b, r in enumerate(rotations):
            nodes = r.nodes(n)
            for k, t in enumerate(r.trips):
                self.bus[t] = b
                self.pos[t] = k
                self.prev[t] = nodes[k]
                self.next[t] = nodes[k + 2]


class Search:
    """Everything an operator needs besides the state itself."""

    def __init__(self, instance: Instance, params: CostParams, config: IlsConfig | None = None):
        self.instance = instance
        self.params = params
        self.config = config or IlsConfig()
        self.n = instance.n_trips
        self.costs = arc_costs_milli(instance, params)
        self.nc = instance.node_compat
        self.ectx = energy_context(instance, params)
        self.c_bus = to_milli(params.c_bus)
        self.c_loc = to_milli(params.c_loc)
        self.candidates = frozenset(instance.candidate_stations)
        self._memo: dict = {}
        self._memo_z: frozenset | None = None
        self.joint = self.config.mode == JOINT
        self.csp = None
        if self.joint:
            from .joint import JointCsp
            self.csp = JointCsp(self)
        threads = self.config.n_threads()
        self.pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def close(self) -> None:
        if self.pool is not None:
            self.pool.shutdown()
            self.pool = None

    def map(self, fn, items):
        items = list(items)
        if self.pool is None or len(items) < 2:
            return [fn(x) for x in items]
        return list(self.pool.map(fn, items))

    # -- feasibility ----------------------------------------------------

    def feasible(self, start_node: int, trips: Sequence[int], end_node: int, stations: frozenset) -> bool:
        if stations is not self._memo_z and stations != self._memo_z:
            self._memo = {}
            self._memo_z = stations
        key = (start_node, tuple(trips), end_node)
        hit = self._memo.get(key)
        if hit is None:
            hit = simulate(self.ectx, start_node, trips, end_node, self.ectx.mask(stations))[0]
            if len(self._memo) > _MEMO_LIMIT:
                self._memo = {}
            self._memo[key] = hit
        return hit

    def rotation_feasible(self, rot: Rotation, stations: frozenset) -> bool:
        return self.feasible(self.n + rot.start_depot, rot.trips, self.n + rot.end_depot, stations)

    def energy(self, rot: Rotation) -> float:
        """Energy for the whole day; without charging the level only falls."""
        e_dh, e_trip = self.ectx.e_dh, self.ectx.e_trip
        nodes = rot.nodes(self.n)
        return sum(e_dh[a][b] for a, b in zip(nodes, nodes[1:])) + sum(e_trip[t] for t in rot.trips)

    def requires_charging(self, rot: Rotation) -> bool:
        return self.energy(rot) > self.params.l_max - self.params.l_min + 1e-9

    # -- objective --------------------------------------------------------

    def base(self, rotations: Sequence[Rotation], stations: Iterable[str]) -> int:
        return base_cost(rotations, stations, self.instance, self.params, self.costs)

    def objective(self, rotations: Sequence[Rotation], stations: frozenset) -> int:
        """f(V, Z) in milli-dollars: base cost, plus split-CAG cost in Joint mode."""
        value = self.base(rotations, stations)
        if self.joint:
            value += self.csp.split_cost(rotations, stations)
        return value

    def state(self, rotations: Sequence[Rotation], stations: Iterable[str], objective: int | None = None,
              **extra) -> SolutionState:
        rotations = tuple(renumber(rotations))
        stations = frozenset(stations)
        if objective is None:
            objective = self.objective(rotations, stations)
        return SolutionState(rotations, stations, int(objective), **extra)
