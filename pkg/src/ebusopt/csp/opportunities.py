"""Charging opportunities: layovers of a fixed rotation with a station at either end."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from ..model import Instance, Rotation

SINGLE, DUAL = "single", "dual"
CAG, GAC, CEE = "cag", "gac", "cee"


@dataclass(frozen=True)
class ChargingOpportunity:
    """One layover in K_b. Windows are inclusive minute ranges.

    Single: stations = (s,), windows = ((first, last),).
    Dual:   stations = (s_end, s_start), windows = (end window, start window).
    e_before is the energy from the previous charge point (or the depot) to the
    first charge point here; e_within is the deadhead between the two ends of a
    Dual layover and 0 for Single.
    """

    bus_id: int
    k: int
    kind: str
    stations: tuple[str, ...]
    windows: tuple[tuple[int, int], ...]
    deadhead_min: int
    e_before: float
    e_within: float
    trips: tuple[int, int]
    at_end: bool = True  # Single only: charging happens before the deadhead

    @property
    def station(self) -> str:
        return self.stations[0]

    @property
    def length(self) -> int:
        a, b = self.windows[0]
        return b - a + 1


@dataclass(frozen=True)
class BusCharging:
    """All opportunities for one bus plus the energy from the last one to the depot."""

    bus_id: int
    opportunities: tuple[ChargingOpportunity, ...]
    e_tail: float
    e_total: float


def _path_energy(rot: Rotation, instance: Instance) -> tuple[list[float], list[float], float]:
    """Cumulative energy at each trip end (before its layover deadhead) and after it."""
    n = instance.n_trips
    e_dh = instance.deadhead.energy_kwh
    trips = instance.trips
    cum = float(e_dh[n + rot.start_depot, rot.trips[0]] + trips[rot.trips[0]].energy_kwh)
    at_end, after_dh = [], []
    for i, j in zip(rot.trips, rot.trips[1:]):
        at_end.append(cum)
        cum += float(e_dh[i, j])
        after_dh.append(cum)
        cum += trips[j].energy_kwh
    total = cum + float(e_dh[rot.trips[-1], n + rot.end_depot])
    return at_end, after_dh, total


def _bus_opportunities(rot: Rotation, stations: frozenset, instance: Instance,
                       strategy: str) -> BusCharging:
    trips = instance.trips
    dh = instance.deadhead
    at_end, after_dh, total = _path_energy(rot, instance)
    opps: list[ChargingOpportunity] = []
    last = 0.0
    for j, (i, k) in enumerate(zip(rot.trips, rot.trips[1:])):
        theta = int(dh.idle_min[i, k])
        if theta <= 0:
            continue
        s_end, s_start = trips[i].end_stop, trips[k].start_stop
        end_ok, start_ok = s_end in stations, s_start in stations
        if not (end_ok or start_ok):
            continue
        beta, alpha, gamma = trips[i].end_time, trips[k].start_time, int(dh.duration_min[i, k])
        end_win = (beta, beta + theta - 1)
        start_win = (beta + gamma, alpha - 1)
        common = dict(bus_id=rot.bus_id, k=len(opps) + 1, deadhead_min=gamma, trips=(i, k))
        if end_ok and start_ok and s_end != s_start and strategy == CEE:
            opps.append(ChargingOpportunity(kind=DUAL, stations=(s_end, s_start),
                                            windows=(end_win, start_win), e_before=at_end[j] - last,
                                            e_within=after_dh[j] - at_end[j], **common))
            last = after_dh[j]
        elif end_ok and (strategy != GAC or not start_ok or s_end == s_start):
            opps.append(ChargingOpportunity(kind=SINGLE, stations=(s_end,), windows=(end_win,),
                                            e_before=at_end[j] - last, e_within=0.0, at_end=True,
                                            **common))
            last = at_end[j]
        else:
            opps.append(ChargingOpportunity(kind=SINGLE, stations=(s_start,), windows=(start_win,),
                                            e_before=after_dh[j] - last, e_within=0.0, at_end=False,
                                            **common))
            last = after_dh[j]
    return BusCharging(rot.bus_id, tuple(opps), total - last, total)


def extract_opportunities(rotations: Sequence[Rotation], stations: Iterable[str], instance: Instance,
                          strategy: str = CEE) -> list[BusCharging]:
    """K_b for every bus. strategy CEE keeps Dual layovers; CAG/GAC collapse them to one end.

    A layover whose two ends are the same stop is Single. Layovers with no idle
    time give no opportunity since every window would be empty.
    """
    if strategy not in (CAG, GAC, CEE):
        raise ValueError(f"unknown strategy {strategy!r}")
    stations = frozenset(stations)
    return [_bus_opportunities(rot, stations, instance, strategy) for rot in rotations]


def collapse(buses: Sequence[BusCharging], strategy: str) -> list[BusCharging]:
    """Reclassify Dual opportunities to the prioritized end (K_b^2 becomes empty)."""
    if strategy not in (CAG, GAC):
        raise ValueError("collapse needs CAG or GAC")
    out = []
    for bus in buses:
        opps, carry = [], 0.0
        for opp in bus.opportunities:
            if opp.kind != DUAL:
                opps.append(replace(opp, e_before=opp.e_before + carry))
                carry = 0.0
                continue
            if strategy == CAG:
                opps.append(replace(opp, kind=SINGLE, stations=opp.stations[:1], windows=opp.windows[:1],
                                    e_before=opp.e_before + carry, e_within=0.0, at_end=True))
                carry = opp.e_within
            else:
                opps.append(replace(opp, kind=SINGLE, stations=opp.stations[1:], windows=opp.windows[1:],
                                    e_before=opp.e_before + carry + opp.e_within, e_within=0.0,
                                    at_end=False))
                carry = 0.0
        out.append(BusCharging(bus.bus_id, tuple(opps), bus.e_tail + carry, bus.e_total))
    return out


def charge_free(bus: BusCharging, l_max: float, l_min: float, tol: float = 1e-9) -> bool:
    """True if the bus completes its day without any charging."""
    return l_max - bus.e_total >= l_min - tol
