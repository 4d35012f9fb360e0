"""Iterated local search for the sequential and joint planning models.

Operators take a SolutionState and a Search (instance, params, config plus
caches). Rotations inside the search are renumbered so bus ids equal list
positions.
"""
from __future__ import annotations

from ..model import CostParams, Instance, SolutionState
from .config import (CLOSE_STATION, EXCHANGE_DEPOTS, EXCHANGE_TRIPS, JOINT, MOVE_KINDS, MULTI_SHIFT, NO_MOVE,
                     OPEN_STATIONS, SEQUENTIAL, SHIFT_TRIP, IlsConfig, Move)
from .core import Layout, Search, renumber
from .moves import apply_changes
from .fleet import FleetResult, final_schedule, optimize_ebus_fleet
from . import search as _search
from . import stations as _stations
from .stations import UnservableTripError


def _ctx(state: SolutionState, search: Search) -> _search.Context:
    return _search.Context(search, state.rotations, state.open_stations)


def _move(choice, kind: str, state: SolutionState) -> Move:
    if choice is None:
        return Move(kind, (), NO_MOVE)
    return choice.move(rotations=tuple(renumber(apply_changes(state.rotations, choice.cand.changes))))


def concurrent_scheduler(instance: Instance, params: CostParams | None = None,
                         config: IlsConfig | None = None) -> SolutionState:
    search = Search(instance, params or CostParams(), config)
    rots, z = _stations.concurrent_scheduler(search)
    return search.state(rots, z)


def exchange_trips(state: SolutionState, search: Search) -> Move:
    """Best feasible trip exchange (NO_MOVE savings when none qualifies).

    Sequential mode only reports improving exchanges; Joint mode ranks the
    hybrid shortlist with the CSP surrogate."""
    return _move(_search.exchange_choice(_ctx(state, search)), EXCHANGE_TRIPS, state)


def shift_trip(state: SolutionState, search: Search) -> Move:
    return _move(_search.shift_choice(_ctx(state, search)), SHIFT_TRIP, state)


def exchange_depots(state: SolutionState, search: Search) -> Move:
    return _move(_search.depot_choice(_ctx(state, search)), EXCHANGE_DEPOTS, state)


def apply_move(state: SolutionState, move: Move, search: Search) -> SolutionState:
    if not move.found or move.rotations is None:
        return state
    return search.state(move.rotations, state.open_stations)


def apply_best_improvement(state: SolutionState, search: Search) -> tuple[SolutionState, Move]:
    step = _search.apply_best_improvement(_ctx(state, search))
    if step is None:
        return state, Move("None", (), NO_MOVE)
    rots, f, move = step
    return search.state(rots, state.open_stations, f), move


def optimize_rotations(state: SolutionState, search: Search, log: list | None = None) -> SolutionState:
    rots, f = _search.optimize_rotations(search, state.rotations, state.open_stations, None, log)
    return search.state(rots, state.open_stations, f)


def optimize_multiple_shifts(state: SolutionState, search: Search, log: list | None = None) -> SolutionState:
    rots, f = _search.optimize_multiple_shifts(search, state.rotations, state.open_stations, None, log)
    return search.state(rots, state.open_stations, f)


def update_utilization(state: SolutionState, search: Search) -> SolutionState:
    """Recompute sigma_cur / sigma_pot and drop open stations nobody uses."""
    kept, cur, pot = _stations.prune_unused(search, state.rotations, state.open_stations)
    return search.state(state.rotations, kept, cur_util=dict(sorted((s, cur[s]) for s in kept)),
                        pot_util=dict(sorted(pot.items())))


def open_charging_stations(state: SolutionState, candidates, search: Search,
                           log: list | None = None) -> SolutionState:
    f = search.objective(state.rotations, state.open_stations)
    rots, z, f = _stations.open_charging_stations(search, state.rotations, state.open_stations,
                                                  list(candidates), f, log)
    return search.state(rots, z, f)


def close_charging_station(state: SolutionState, station: str, search: Search,
                           log: list | None = None) -> SolutionState:
    if station not in state.open_stations:
        raise ValueError(f"station {station!r} is not open")
    f = search.objective(state.rotations, state.open_stations)
    rots, z, f = _stations.close_charging_station(search, state.rotations, state.open_stations, station,
                                                  f, log)
    return search.state(rots, z, f)


__all__ = [
    "CLOSE_STATION", "EXCHANGE_DEPOTS", "EXCHANGE_TRIPS", "JOINT", "MOVE_KINDS", "MULTI_SHIFT", "NO_MOVE",
    "OPEN_STATIONS", "SEQUENTIAL", "SHIFT_TRIP", "IlsConfig", "Move", "Layout", "Search",
    "renumber", "FleetResult", "final_schedule", "optimize_ebus_fleet", "UnservableTripError",
    "concurrent_scheduler", "exchange_trips", "shift_trip", "exchange_depots", "apply_move",
    "apply_best_improvement", "optimize_rotations", "optimize_multiple_shifts", "update_utilization",
    "open_charging_stations", "close_charging_station",
]
