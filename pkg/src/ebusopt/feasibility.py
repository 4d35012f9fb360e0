"""Charge-feasibility kernels under the charge-and-go policy.

The single-rotation check simulates max-rate charging: at a layover whose
end stop hosts an open station the bus tops up and then deadheads; when only
the next start stop is open it deadheads, is checked, then tops up; otherwise
it only deadheads. Every checkpoint must stay at or above l_min.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import CostParams, Instance, ModelError, Rotation

_TOL = 1e-9


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    feasible_till_trip: int  # 1-based position; -1 if none, n_b when feasible


class EnergyContext:
    """Plain-Python views of the instance arrays, built once per instance and params."""

    def __init__(self, instance: Instance, params: CostParams):
        n = instance.n_trips
        self.n = n
        self.e_trip = [t.energy_kwh for t in instance.trips]
        self.e_dh = instance.deadhead.energy_kwh.tolist()
        self.idle = instance.deadhead.idle_min.tolist()
        stop_ids = sorted({t.start_stop for t in instance.trips} | {t.end_stop for t in instance.trips}
                          | {d.stop for d in instance.depots})
        self.stop_index = {s: k for k, s in enumerate(stop_ids)}
        self.stop_ids = stop_ids
        self.start_sid = [self.stop_index[t.start_stop] for t in instance.trips]
        self.end_sid = [self.stop_index[t.end_stop] for t in instance.trips]
        self.l_max = params.l_max
        self.l_min = params.l_min
        self.rate = min(params.charge_rate_max, params.transfer_max)
        self._mask_cache: tuple[frozenset | None, list[bool]] = (None, [])

    def mask(self, stations: Iterable[str]) -> list[bool]:
        key = stations if isinstance(stations, frozenset) else frozenset(stations)
        cached = self._mask_cache  # single read keeps this safe across threads
        if cached[0] == key:
            return cached[1]
        m = [False] * len(self.stop_ids)
        for s in key:
            k = self.stop_index.get(s)
            if k is not None:
                m[k] = True
        self._mask_cache = (key, m)
        return m


def energy_context(instance: Instance, params: CostParams) -> EnergyContext:
    cache = instance.__dict__.get("_energy_ctx")
    if cache is not None and cache[0] is params:
        return cache[1]
    ctx = EnergyContext(instance, params)
    object.__setattr__(instance, "_energy_ctx", (params, ctx))
    return ctx


def simulate(ctx: EnergyContext, start_node: int, trips: Sequence[int], end_node: int,
             mask: Sequence[bool]) -> tuple[bool, int]:
    """Core of the check; returns (feasible, feasible_till_trip)."""
    e_dh, e_trip, idle = ctx.e_dh, ctx.e_trip, ctx.idle
    l_max, floor, rate = ctx.l_max, ctx.l_min - _TOL, ctx.rate
    end_sid, start_sid = ctx.end_sid, ctx.start_sid
    n_b = len(trips)
    first = trips[0]
    l = l_max - e_dh[start_node][first] - e_trip[first]
    if l < floor:
        return False, -1
    till = -1
    for j in range(n_b - 1):
        i, k = trips[j], trips[j + 1]
        if l - e_dh[i][end_node] >= floor:
            till = j + 1
        theta = idle[i][k]
        if mask[end_sid[i]]:
            l = min(l_max, l + rate * theta) - e_dh[i][k]
            if l < floor:
                return False, till
        elif mask[start_sid[k]]:
            l -= e_dh[i][k]
            if l < floor:
                return False, till
            l = min(l_max, l + rate * theta)
        else:
            l -= e_dh[i][k]
            if l < floor:
                return False, till
        l -= e_trip[k]
        if l < floor:
            return False, till
    l -= e_dh[trips[-1]][end_node]
    if l < floor:
        return False, till
    return True, n_b


def _check_trips(rotation: Rotation, instance: Instance) -> None:
    n = instance.n_trips
    for t in rotation.trips:
        if not 0 <= t < n:
            raise ModelError(f"rotation {rotation.bus_id} references unknown trip {t}")
    if not 0 <= rotation.start_depot < instance.n_depots or not 0 <= rotation.end_depot < instance.n_depots:
        raise ModelError(f"rotation {rotation.bus_id} references an unknown depot")


def is_rotation_charge_feasible(rotation: Rotation, stations: Iterable[str], params: CostParams,
                                instance: Instance) -> FeasibilityReport:
    _check_trips(rotation, instance)
    ctx = energy_context(instance, params)
    n = instance.n_trips
    ok, till = simulate(ctx, n + rotation.start_depot, rotation.trips, n + rotation.end_depot,
                        ctx.mask(stations))
    return FeasibilityReport(ok, till)


def requires_charging(rotation: Rotation, params: CostParams, instance: Instance) -> bool:
    """A bus requires charging iff its rotation is infeasible with no stations."""
    return not is_rotation_charge_feasible(rotation, frozenset(), params, instance).feasible


def are_rotations_charge_feasible(rotations: Sequence[Rotation], stations: Iterable[str],
                                  affected: Iterable[int], params: CostParams,
                                  instance: Instance) -> tuple[bool, list[Rotation]]:
    """Check affected rotations, splitting infeasible ones after feasible_till_trip.

    The head keeps the original depots; the tail starts and ends at the depot
    nearest to its first trip, so the depot multisets stay balanced.
    """
    stations = frozenset(stations)
    affected = set(affected)
    ids = {r.bus_id for r in rotations}
    if not affected <= ids:
        raise ModelError(f"affected buses not in rotations: {sorted(affected - ids)[:5]}")
    for r in rotations:
        _check_trips(r, instance)
    ctx = energy_context(instance, params)
    mask = ctx.mask(stations)
    n = instance.n_trips
    next_id = max(ids, default=-1) + 1
    out: list[Rotation] = []
    extra: list[Rotation] = []
    for rot in rotations:
        if rot.bus_id not in affected:
            out.append(rot)
            continue
        pending = [rot]
        while pending:
            cur = pending.pop(0)
            ok, till = simulate(ctx, n + cur.start_depot, cur.trips, n + cur.end_depot, mask)
            if ok:
                (out if cur.bus_id == rot.bus_id else extra).append(cur)
                continue
            if len(cur.trips) == 1:
                return False, list(rotations)
            cut = max(till, 1)
            head = Rotation(cur.bus_id, cur.start_depot, cur.trips[:cut], cur.end_depot)
            d = instance.nearest_depot(cur.trips[cut])
            tail = Rotation(next_id, d, cur.trips[cut:], d)
            next_id += 1
            pending[:0] = [head, tail]
    return True, out + extra
