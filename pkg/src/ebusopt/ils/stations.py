"""Initial solution and the location operators."""
from __future__ import annotations

from collections import defaultdict
from typing import Sequence

from ..csp import CspError
from ..feasibility import are_rotations_charge_feasible
from ..model import ModelError, Rotation
from .core import Search, renumber
from .search import optimize_rotations


class UnservableTripError(ModelError):
    def __init__(self, trip: int, label: str = ""):
        self.trip = trip
        name = f"{trip} ({label})" if label else str(trip)
        super().__init__(f"trip {name} cannot be served even as a single-trip rotation")


def _fail_layover(search: Search, start: int, trips: Sequence[int], end: int, mask) -> tuple[bool, int]:
    """Like the feasibility check, but reports the last layover reached (-1 = none)."""
    c = search.ectx
    floor = c.l_min - 1e-9
    l = c.l_max - c.e_dh[start][trips[0]] - c.e_trip[trips[0]]
    if l < floor:
        return False, -1
    for j in range(len(trips) - 1):
        i, k = trips[j], trips[j + 1]
        theta = c.idle[i][k]
        if mask[c.end_sid[i]]:
            l = min(c.l_max, l + c.rate * theta) - c.e_dh[i][k]
            if l < floor:
                return False, j
        elif mask[c.start_sid[k]]:
            l -= c.e_dh[i][k]
            if l < floor:
                return False, j
            l = min(c.l_max, l + c.rate * theta)
        else:
            l -= c.e_dh[i][k]
            if l < floor:
                return False, j
        l -= c.e_trip[k]
        if l < floor:
            return False, j
    l -= c.e_dh[trips[-1]][end]
    return (l >= floor), len(trips) - 2


def grow_stations(search: Search, start: int, trips: Sequence[int], end: int,
                  stations: frozenset) -> frozenset | None:
    """Open stations until the rotation is feasible, or None if that is impossible.

    Walking back from the failure, the first layover with idle time and an
    unopened candidate gets a station, its end stop first (charge-and-go).
    """
    inst, c = search.instance, search.ectx
    z = set(stations)
    while True:
        ok, last = _fail_layover(search, start, trips, end, c.mask(frozenset(z)))
        if ok:
            return frozenset(z)
        opened = False
        for j in range(last, -1, -1):
            i, k = trips[j], trips[j + 1]
            if c.idle[i][k] <= 0:
                continue
            for stop in (inst.trips[i].end_stop, inst.trips[k].start_stop):
                if stop not in z and stop in search.candidates:
                    z.add(stop)
                    opened = True
                    break
            if opened:
                break
        if not opened:
            return None


def concurrent_scheduler(search: Search) -> tuple[list[Rotation], frozenset]:
    """Earliest-start-first greedy: a trip joins the first-created rotation that
    can take it (opening stations if needed), else starts a new one at delta(i)."""
    inst, n = search.instance, search.n
    order = sorted(range(n), key=lambda t: (inst.trips[t].start_time, t))
    rots: list[list] = []  # [start_node, trips, end_node]
    z = frozenset()
    for t in order:
        placed = False
        for r in rots:
            if not search.nc[r[1][-1], t]:
                continue
            trips = r[1] + [t]
            if search.feasible(r[0], trips, r[2], z):
                r[1] = trips
                placed = True
                break
            grown = grow_stations(search, r[0], trips, r[2], z)
            if grown is not None:
                r[1] = trips
                z = grown
                placed = True
                break
        if placed:
            continue
        d = n + inst.nearest_depot(t)
        if not search.feasible(d, [t], d, z):
            raise UnservableTripError(t, inst.trips[t].label)
        rots.append([d, [t], d])
    out = [Rotation(b, s - n, tuple(tr), e - n) for b, (s, tr, e) in enumerate(rots)]
    return out, z


def utilization(search: Search, rotations: Sequence[Rotation], stations: frozenset
                ) -> tuple[dict[str, int], dict[str, int]]:
    """Current and potential utilization (minutes) under charge-and-go."""
    inst = search.instance
    idle = search.ectx.idle
    cur = {s: 0 for s in stations}
    pot: dict[str, int] = defaultdict(int)
    for r in rotations:
        if not search.requires_charging(r):
            continue
        for i, k in zip(r.trips, r.trips[1:]):
            theta = int(idle[i][k])
            s_end, s_start = inst.trips[i].end_stop, inst.trips[k].start_stop
            if s_end in stations:
                cur[s_end] += theta
            elif s_start in stations:
                cur[s_start] += theta
                pot[s_end] += theta
            else:
                pot[s_start] += theta
                pot[s_end] += theta
    return cur, dict(pot)


def prune_unused(search: Search, rotations: Sequence[Rotation], stations: frozenset
                 ) -> tuple[frozenset, dict[str, int], dict[str, int]]:
    cur, pot = utilization(search, rotations, stations)
    kept = frozenset(s for s in stations if cur[s] > 0)
    return kept, cur, pot


def affected_buses(search: Search, rotations: Sequence[Rotation], stations: frozenset, closing: str) -> list[int]:
    inst = search.instance
    out = []
    for b, r in enumerate(rotations):
        if not search.requires_charging(r):
            continue
        for i, k in zip(r.trips, r.trips[1:]):
            s_end, s_start = inst.trips[i].end_stop, inst.trips[k].start_stop
            if s_end == closing or (s_start == closing and s_end not in stations):
                out.append(b)
                break
    return out


def _prune(search: Search, rotations, stations) -> tuple[frozenset, dict]:
    """Drop stations the mode considers unused; returns (Z, closure metric)."""
    if not search.joint:
        kept, cur, _ = prune_unused(search, rotations, stations)
        return kept, {s: cur[s] for s in kept}
    used, sched = search.csp.clp(rotations, stations)
    kept = frozenset(s for s in stations if s in used)
    return kept, {s: sched.station_caps.get(s, 0.0) for s in kept}


def _pruned_if_better(search: Search, rotations, stations, f):
    kept, metric = _prune(search, rotations, stations)
    if kept != stations:
        f_new = search.objective(rotations, kept)
        if f_new <= f:
            return kept, metric, f_new
        metric = {s: metric.get(s, 0.0) for s in stations}
        return stations, metric, f
    return stations, metric, f


def open_charging_stations(search: Search, rotations: Sequence[Rotation], stations: frozenset,
                           opening: Sequence[str], f: int, log: list | None = None):
    """Tentatively open stations, re-optimize, prune; keep only if f improves."""
    z_temp = frozenset(stations) | frozenset(opening)
    if z_temp == stations:
        return list(rotations), stations, f
    f_open = search.objective(rotations, z_temp)
    rots, f_temp = optimize_rotations(search, rotations, z_temp, f_open)
    z_temp, _, f_temp = _pruned_if_better(search, rots, z_temp, f_temp)
    if f - f_temp > search.config.improvement_eps:
        if log is not None:
            log.append(("OpenStations", f - f_temp, f_temp))
        return rots, z_temp, f_temp
    return list(rotations), stations, f


def close_charging_station(search: Search, rotations: Sequence[Rotation], stations: frozenset,
                           closing: str, f: int, log: list | None = None):
    """Close one station, splitting rotations it strands, re-optimize; keep if f improves."""
    z_temp = frozenset(stations) - {closing}
    affected = affected_buses(search, rotations, stations, closing)
    ok, split = are_rotations_charge_feasible(renumber(rotations), z_temp, affected, search.params,
                                              search.instance)
    if not ok:
        return list(rotations), stations, f
    split = renumber(split)
    try:
        f_split = search.objective(split, z_temp)
    except CspError:  # CSP unserviceable despite the check: treat as infeasible closure
        return list(rotations), stations, f
    rots, f_temp = optimize_rotations(search, split, z_temp, f_split)
    if f - f_temp > search.config.improvement_eps:
        if log is not None:
            log.append(("CloseStation", f - f_temp, f_temp))
        return rots, z_temp, f_temp
    return list(rotations), stations, f
