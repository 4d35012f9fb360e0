"""Domain types shared across the package and the objective accountant.

Money is integer milli-dollars. Time is integer minutes from the start of
the service day; GTFS times past 24:00 extend the axis (25:10 -> 1510).
Node indexing: trips are nodes 0..n-1, depots are nodes n..n+m-1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

MINUTES_PER_DAY = 1440


class ModelError(ValueError):
    pass


def to_milli(dollars: float) -> int:
    return int(round(dollars * 1000.0))


def to_dollars(milli: int) -> float:
    return milli / 1000.0


@dataclass(frozen=True)
class Trip:
    id: int
    route_id: str
    start_stop: str
    end_stop: str
    start_time: int
    end_time: int
    distance_km: float
    energy_kwh: float
    label: str = ""

    def __post_init__(self):
        if not self.start_time < self.end_time:
            raise ModelError(f"trip {self.id}: start_time must precede end_time")
        if not (self.distance_km >= 0 and self.energy_kwh >= 0):
            raise ModelError(f"trip {self.id}: negative distance or energy")


@dataclass(frozen=True)
class Depot:
    id: int  # depot index 0..m-1; node index is n + id
    stop: str


@dataclass(frozen=True, eq=False)
class DeadheadMatrix:
    """Node-level deadhead data, rows = from end of node, cols = to start of node."""

    duration_min: np.ndarray
    distance_km: np.ndarray
    energy_kwh: np.ndarray
    idle_min: np.ndarray

    def __post_init__(self):
        for arr in (self.duration_min, self.distance_km, self.energy_kwh, self.idle_min):
            arr.setflags(write=False)
            if arr.size and arr.min() < 0:
                raise ModelError("deadhead entries must be non-negative")


@dataclass(frozen=True)
class PricingSchedule:
    """Electricity price per kWh by period; periods tile one day [0, 1440)."""

    periods: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        cur = 0
        for start, end, price in sorted(self.periods):
            if start != cur or end <= start:
                raise ModelError("pricing periods must tile [0, 1440) without gaps or overlaps")
            if price < 0:
                raise ModelError("prices must be non-negative")
            cur = end
        if cur != MINUTES_PER_DAY:
            raise ModelError("pricing periods must tile [0, 1440) without gaps or overlaps")
        table = np.zeros(MINUTES_PER_DAY)
        for start, end, price in self.periods:
            table[start:end] = price
        table.setflags(write=False)
        object.__setattr__(self, "_table", table)

    @classmethod
    def default(cls) -> "PricingSchedule":
        return cls(((0, 540, 555.0), (540, 840, 444.0), (840, 960, 555.0),
                    (960, 1260, 1355.0), (1260, 1440, 555.0)))

    @classmethod
    def flat(cls, price: float) -> "PricingSchedule":
        return cls(((0, MINUTES_PER_DAY, float(price)),))

    def price(self, minute: int) -> float:
        return float(self._table[minute % MINUTES_PER_DAY])

    def prices(self, first: int, last: int) -> np.ndarray:
        """Prices for minutes first..last inclusive."""
        idx = np.arange(first, last + 1) % MINUTES_PER_DAY
        return self._table[idx]


@dataclass(frozen=True)
class CostParams:
    c_bus: float = 381_500.0
    c_loc: float = 218_000.0
    c_km: float = 2_100.0
    c_cap: float = 654.0
    pricing: PricingSchedule = field(default_factory=PricingSchedule.default)
    charge_rate_max: float = 2.505  # lambda
    transfer_max: float = 2.505  # psi_b
    l_max: float = 300.0
    l_min: float = 45.0
    consumption_rate: float = 1.2
    # the default per-km and electricity prices already carry the lifetime factor
    lifetime_scale: float = 1.0

    def __post_init__(self):
        if not 0 <= self.l_min < self.l_max:
            raise ModelError("need 0 <= l_min < l_max")
        if self.charge_rate_max <= 0 or self.transfer_max <= 0:
            raise ModelError("charge rates must be positive")
        if min(self.c_bus, self.c_loc, self.c_km, self.c_cap, self.lifetime_scale) < 0:
            raise ModelError("costs must be non-negative")

    @property
    def usable_kwh(self) -> float:
        return self.l_max - self.l_min


@dataclass(frozen=True, eq=False)
class Instance:
    trips: tuple[Trip, ...]
    depots: tuple[Depot, ...]
    candidate_stations: frozenset[str]
    deadhead: DeadheadMatrix
    compat: np.ndarray  # bool n x n, compat[i, j] iff (i, j) in A^comp
    stops: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        n, m = len(self.trips), len(self.depots)
        if m == 0:
            raise ModelError("instance needs at least one depot")
        if self.deadhead.duration_min.shape != (n + m, n + m):
            raise ModelError("deadhead matrix does not match trips + depots")
        if self.compat.shape != (n, n):
            raise ModelError("compatibility matrix does not match trips")
        for k, t in enumerate(self.trips):
            if t.id != k:
                raise ModelError("trip ids must equal their position")
        self.compat.setflags(write=False)
        origin: dict[str, list[int]] = {}
        dest: dict[str, list[int]] = {}
        for t in self.trips:
            origin.setdefault(t.start_stop, []).append(t.id)
            dest.setdefault(t.end_stop, []).append(t.id)
        object.__setattr__(self, "origin_sets", {s: tuple(v) for s, v in origin.items()})
        object.__setattr__(self, "dest_sets", {s: tuple(v) for s, v in dest.items()})
        full = np.zeros((n + m, n + m), dtype=bool)
        full[:n, :n] = self.compat
        full[n:, :n] = True
        full[:n, n:] = True
        full.setflags(write=False)
        object.__setattr__(self, "node_compat", full)

    @property
    def n_trips(self) -> int:
        return len(self.trips)

    @property
    def n_depots(self) -> int:
        return len(self.depots)

    def depot_node(self, depot: int) -> int:
        return len(self.trips) + depot

    def compat_arcs(self) -> list[tuple[int, int]]:
        """A as explicit node pairs: A^comp plus every pull-out and pull-in arc."""
        n = self.n_trips
        arcs = [(int(i), int(j)) for i, j in zip(*np.nonzero(self.compat))]
        for d in range(self.n_depots):
            for i in range(n):
                arcs.append((n + d, i))
                arcs.append((i, n + d))
        return arcs

    def nearest_depot(self, trip: int) -> int:
        """delta(i): depot closest to the start of trip, ties to lower index."""
        n = self.n_trips
        col = self.deadhead.distance_km[n:, trip]
        return int(np.argmin(col))


@dataclass(frozen=True)
class Rotation:
    bus_id: int
    start_depot: int
    trips: tuple[int, ...]
    end_depot: int

    def __post_init__(self):
        if not self.trips:
            raise ModelError(f"rotation {self.bus_id} has no trips")

    def nodes(self, n_trips: int) -> list[int]:
        return [n_trips + self.start_depot, *self.trips, n_trips + self.end_depot]

    def with_trips(self, trips: Sequence[int]) -> "Rotation":
        return Rotation(self.bus_id, self.start_depot, tuple(trips), self.end_depot)


@dataclass(frozen=True)
class SolutionState:
    rotations: tuple[Rotation, ...]
    open_stations: frozenset[str]
    objective_cache: int = 0
    cur_util: Mapping[str, int] = field(default_factory=dict)
    pot_util: Mapping[str, int] = field(default_factory=dict)
    power_cap: Mapping[str, float] = field(default_factory=dict)

    def replace(self, **changes) -> "SolutionState":
        data = dict(rotations=self.rotations, open_stations=self.open_stations,
                    objective_cache=self.objective_cache, cur_util=self.cur_util,
                    pot_util=self.pot_util, power_cap=self.power_cap)
        data.update(changes)
        return SolutionState(**data)


def check_partition(rotations: Iterable[Rotation], n_trips: int) -> None:
    seen = np.zeros(n_trips, dtype=int)
    for rot in rotations:
        for t in rot.trips:
            if not 0 <= t < n_trips:
                raise ModelError(f"rotation {rot.bus_id} references unknown trip {t}")
            seen[t] += 1
    bad = np.nonzero(seen != 1)[0]
    if bad.size:
        t = int(bad[0])
        raise ModelError(f"trip partition violated: trip {t} served {int(seen[t])} times")


def check_depot_balance(rotations: Iterable[Rotation]) -> None:
    starts: dict[int, int] = {}
    for rot in rotations:
        starts[rot.start_depot] = starts.get(rot.start_depot, 0) + 1
        starts[rot.end_depot] = starts.get(rot.end_depot, 0) - 1
    off = {d: c for d, c in starts.items() if c}
    if off:
        raise ModelError(f"depot balance violated: {off}")


def arc_costs_milli(instance: Instance, params: CostParams) -> np.ndarray:
    """Integer milli-dollar cost for every node pair, lifetime-scaled."""
    km = instance.deadhead.distance_km
    cost = np.rint(km * (params.c_km * params.lifetime_scale * 1000.0)).astype(np.int64)
    cost.setflags(write=False)
    return cost


def deadhead_km(rotations: Iterable[Rotation], instance: Instance) -> float:
    km = instance.deadhead.distance_km
    n = instance.n_trips
    total = 0.0
    for rot in rotations:
        nodes = rot.nodes(n)
        total += float(sum(km[a, b] for a, b in zip(nodes, nodes[1:])))
    return total


def deadhead_cost(rotations: Iterable[Rotation], instance: Instance, params: CostParams,
                  costs: np.ndarray | None = None) -> int:
    if costs is None:
        costs = arc_costs_milli(instance, params)
    n = instance.n_trips
    total = 0
    for rot in rotations:
        nodes = rot.nodes(n)
        total += int(costs[nodes[:-1], nodes[1:]].sum())
    return total


def base_cost(rotations: Sequence[Rotation], stations: Iterable[str], instance: Instance,
              params: CostParams, costs: np.ndarray | None = None) -> int:
    """Bus + facility + deadhead cost in milli-dollars."""
    n_bus = len(rotations)
    n_loc = len(frozenset(stations))
    return (n_bus * to_milli(params.c_bus) + n_loc * to_milli(params.c_loc)
            + deadhead_cost(rotations, instance, params, costs))


def total_cost(state: SolutionState, schedule_cost: int | None, params: CostParams,
               instance: Instance) -> int:
    """Objective in milli-dollars; schedule_cost is electricity + capacity (milli)."""
    check_partition(state.rotations, instance.n_trips)
    value = base_cost(state.rotations, state.open_stations, instance, params)
    if schedule_cost is not None:
        value += int(schedule_cost)
    return value

