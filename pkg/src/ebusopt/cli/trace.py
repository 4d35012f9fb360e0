"""Minute-level replay of a plan: battery trace and per-bus activity.

The replay works only from rotations, the deadhead matrix and the per-minute
transfers, so the validator can use it as an independent check on the
solver's bookkeeping.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..model import CostParams, Instance, Rotation

DEPOT_OUT, TRIP_START, TRIP_END, CHARGE, DEADHEAD_END, DEPOT_IN = (
    "depot_out", "trip_start", "trip_end", "charge", "deadhead_end", "depot_in")


@dataclass
class BusReplay:
    bus: int
    points: list[tuple[int, str, float]] = field(default_factory=list)  # (minute, event, kWh after)
    problems: list[str] = field(default_factory=list)
    consumed: float = 0.0
    charged: float = 0.0
    service_min: int = 0
    deadhead_min: int = 0
    charging_min: int = 0

    @property
    def span(self) -> int:
        return self.points[-1][0] - self.points[0][0] if self.points else 0


def group_transfers(transfers: Mapping[tuple[int, str, int], float]
                    ) -> dict[int, dict[tuple[str, int], float]]:
    out: dict[int, dict[tuple[str, int], float]] = defaultdict(dict)
    for (b, s, t), v in transfers.items():
        out[b][(s, t)] = out[b].get((s, t), 0.0) + v
    return out


def replay_bus(rot: Rotation, charges: Mapping[tuple[str, int], float], instance: Instance,
               params: CostParams, tol: float = 1e-6) -> BusReplay:
    """Walk the day minute by minute; charges at a layover's end stop happen before
    the deadhead, charges at its start stop after it."""
    n = instance.n_trips
    trips = instance.trips
    dh = instance.deadhead
    rep = BusReplay(rot.bus_id)
    level = params.l_max
    used: set[tuple[str, int]] = set()

    def point(minute: int, event: str) -> None:
        rep.points.append((int(minute), event, level))
        if level < params.l_min - tol:
            rep.problems.append(f"bus {rot.bus_id}: level {level:.6f} kWh below l_min at minute {minute} ({event})")
        if level > params.l_max + tol:
            rep.problems.append(f"bus {rot.bus_id}: level {level:.6f} kWh above l_max at minute {minute} ({event})")

    def drive(a: int, b: int) -> float:
        nonlocal level
        e = float(dh.energy_kwh[a, b])
        level -= e
        rep.consumed += e
        rep.deadhead_min += int(dh.duration_min[a, b])
        return e

    def charge_at(stop: str, minutes: list[int]) -> None:
        nonlocal level
        for t in minutes:
            v = charges[(stop, t)]
            used.add((stop, t))
            if v <= 0:
                continue
            level += v
            rep.charged += v
            rep.charging_min += 1
            point(t + 1, CHARGE)

    first = rot.trips[0]
    start = n + rot.start_depot
    point(trips[first].start_time - int(dh.duration_min[start, first]), DEPOT_OUT)
    drive(start, first)
    by_stop: dict[str, list[int]] = defaultdict(list)
    for (s, t) in sorted(charges):
        by_stop[s].append(t)
    for j, i in enumerate(rot.trips):
        ti = trips[i]
        point(ti.start_time, TRIP_START)
        level -= ti.energy_kwh
        rep.consumed += ti.energy_kwh
        rep.service_min += ti.end_time - ti.start_time
        point(ti.end_time, TRIP_END)
        if j + 1 == len(rot.trips):
            break
        k = rot.trips[j + 1]
        tk = trips[k]
        gamma = int(dh.duration_min[i, k])
        end_min = [t for t in by_stop.get(ti.end_stop, ()) if ti.end_time <= t < tk.start_time]
        start_min = [] if tk.start_stop == ti.end_stop else \
            [t for t in by_stop.get(tk.start_stop, ()) if ti.end_time <= t < tk.start_time]
        charge_at(ti.end_stop, end_min)
        depart = max([ti.end_time] + [t + 1 for t in end_min])
        arrive = depart + gamma
        drive(i, k)
        point(arrive, DEADHEAD_END)
        if arrive > tk.start_time:
            rep.problems.append(f"bus {rot.bus_id}: charging at {ti.end_stop} leaves no time to reach "
                                f"trip {k} (arrives {arrive}, departs {tk.start_time})")
        early = [t for t in start_min if t < arrive]
        if early:
            rep.problems.append(f"bus {rot.bus_id}: charges at {tk.start_stop} minute {early[0]} before arriving "
                                f"at minute {arrive}")
        charge_at(tk.start_stop, start_min)
    last = rot.trips[-1]
    end = n + rot.end_depot
    drive(last, end)
    point(trips[last].end_time + int(dh.duration_min[last, end]), DEPOT_IN)
    stray = sorted(set(charges) - used)
    for s, t in stray:
        if charges[(s, t)] > tol:
            rep.problems.append(f"bus {rot.bus_id}: transfer at {s} minute {t} outside every layover at that stop")
    return rep


def replay(rotations: Sequence[Rotation], transfers: Mapping[tuple[int, str, int], float],
           instance: Instance, params: CostParams, tol: float = 1e-6) -> list[BusReplay]:
    by_bus = group_transfers(transfers)
    return [replay_bus(r, by_bus.get(r.bus_id, {}), instance, params, tol) for r in rotations]
