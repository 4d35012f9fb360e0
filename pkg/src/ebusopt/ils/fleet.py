"""The overall procedure: CS, multi-shift, open stations, closure loop, final CEE."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..csp import CEE, ChargeSchedule, extract_opportunities, solve_cee_milp
from ..model import CostParams, Instance, Rotation, SolutionState
from ..solver import Limits
from .config import IlsConfig
from .core import Search, renumber
from .search import optimize_multiple_shifts, optimize_rotations
from .stations import (_pruned_if_better, close_charging_station, concurrent_scheduler,
                       open_charging_stations, utilization)


@dataclass
class FleetResult:
    state: SolutionState  # objective_cache = base cost + final CEE cost
    schedule: ChargeSchedule
    log: list[dict] = field(default_factory=list)
    initial: SolutionState | None = None  # concurrent scheduler output, objective_cache = f
    initial_schedule: ChargeSchedule | None = None
    search_objective: int = 0  # f at the end of the search
    kept_initial: bool = False

    @property
    def total(self) -> int:
        return self.state.objective_cache


def final_schedule(search: Search, rotations: Sequence[Rotation], stations: frozenset) -> ChargeSchedule:
    cfg = search.config
    charging = [r for r in renumber(rotations) if search.requires_charging(r)]
    if not charging:
        return ChargeSchedule(CEE)
    buses = extract_opportunities(charging, stations, search.instance, CEE)
    limits = Limits(max_nodes=cfg.final_max_nodes, time_limit=cfg.final_time_limit)
    return solve_cee_milp(buses, search.params, backend=cfg.final_backend or cfg.csp_backend, limits=limits)


def _state(search: Search, rots, stations, total: int, sched: ChargeSchedule) -> SolutionState:
    cur, pot = utilization(search, rots, stations)
    return SolutionState(tuple(renumber(rots)), frozenset(stations), int(total), dict(sorted(cur.items())),
                         dict(sorted(pot.items())), dict(sched.station_caps))


def optimize_ebus_fleet(instance: Instance, params: CostParams | None = None,
                        config: IlsConfig | None = None) -> FleetResult:
    params = params or CostParams()
    search = Search(instance, params, config)
    try:
        return _run(search)
    finally:
        search.close()


def _run(search: Search) -> FleetResult:
    cfg = search.config
    entries: list[tuple[str, int, int]] = []
    rots, z = concurrent_scheduler(search)
    cs_rots, cs_z = list(rots), z
    f = f_cs = search.objective(rots, z)
    entries.append(("Initial", 0, f))

    rots, f = optimize_multiple_shifts(search, rots, z, f, entries)
    # also descend once outside the station operators, whose rejections discard their rotations
    rots, f = optimize_rotations(search, rots, z, f, entries, multi_shift=False)

    z_new, _, f_new = _pruned_if_better(search, rots, z, f)
    if z_new != z:
        entries.append(("CloseStation", f - f_new, f_new))
        z, f = z_new, f_new
    _, pot = utilization(search, rots, z)
    opening = [s for s in pot if pot[s] > 0 and s not in z and s in search.candidates]
    opening.sort(key=lambda s: (pot[s], s), reverse=cfg.open_order == "descending")
    if opening:
        rots, z, f = open_charging_stations(search, rots, z, opening, f, entries)

    to_close = set(z)
    while to_close:
        z_new, metric, f_new = _pruned_if_better(search, rots, z, f)
        if z_new != z:
            entries.append(("CloseStation", f - f_new, f_new))
            z, f = z_new, f_new
        to_close &= set(z)
        to_close -= {s for s in to_close if metric.get(s, 0) <= 0}
        if not to_close:
            break
        s_close = min(to_close, key=lambda s: (metric[s], s))
        to_close.discard(s_close)
        rots, z, f = close_charging_station(search, rots, z, s_close, f, entries)

    rots = renumber(rots)
    sched = final_schedule(search, rots, z)
    total = search.base(rots, z) + sched.total
    cs_base = search.base(cs_rots, cs_z)
    cs_sched = None
    kept_initial = False
    if cs_base < total:
        cs_sched = final_schedule(search, cs_rots, cs_z)
        if cs_base + cs_sched.total < total:
            rots, z, sched, total = cs_rots, cs_z, cs_sched, cs_base + cs_sched.total
            kept_initial = True
    log = [{"iteration": k, "move": kind, "savings": int(s), "objective": int(obj)}
           for k, (kind, s, obj) in enumerate(entries)]
    initial = SolutionState(tuple(cs_rots), cs_z, int(f_cs))
    return FleetResult(_state(search, rots, z, total, sched), sched, log, initial, cs_sched, f, kept_initial)
