"""Instance assembly: compatibility arcs, depot choice, fleet lower bound."""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from ..model import CostParams, DeadheadMatrix, Depot, Instance, Trip
from .geometry import build_deadhead, node_deadhead


class IngestError(ValueError):
    pass


def build_compatibility(trips: Sequence[Trip], deadhead: DeadheadMatrix,
                        depots: Sequence[Depot] = ()) -> np.ndarray:
    """Boolean n x n matrix of A^comp: beta_i + gamma_ij + theta_ij <= alpha_j.

    Depot arcs are implicit (every trip has a pull-out and a pull-in arc).
    """
    n = len(trips)
    if n == 0:
        return np.zeros((0, 0), dtype=bool)
    alpha = np.array([t.start_time for t in trips], dtype=np.int64)
    beta = np.array([t.end_time for t in trips], dtype=np.int64)
    gamma = np.asarray(deadhead.duration_min)[:n, :n]
    comp = beta[:, None] + gamma <= alpha[None, :]
    np.fill_diagonal(comp, False)
    return comp


def terminal_counts(trips: Sequence[Trip]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for t in trips:
        counts[t.start_stop] = counts.get(t.start_stop, 0) + 1
        counts[t.end_stop] = counts.get(t.end_stop, 0) + 1
    return counts


def select_depots(trips: Sequence[Trip], k_max: int) -> list[str]:
    """Top-k terminals by trips originating or terminating there; ties by stop id."""
    if k_max < 1:
        raise IngestError("k_max must be >= 1")
    counts = terminal_counts(trips)
    if not counts:
        raise IngestError("no candidate terminals")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [sid for sid, _ in ranked[:k_max]]


def min_fleet_bound(trips: Sequence[Trip]) -> int:
    """Peak number of simultaneously running trips (ends before starts at ties)."""
    events = [(t.start_time, 1) for t in trips] + [(t.end_time, 0) for t in trips]
    events.sort()
    best = cur = 0
    for _, kind in events:
        cur += 1 if kind else -1
        best = max(best, cur)
    return best


def renumber_trips(trips: Sequence[Trip]) -> list[Trip]:
    """Sort by (start, end, label) and assign ids equal to positions."""
    order = sorted(trips, key=lambda t: (t.start_time, t.end_time, t.label, t.id))
    return [Trip(k, t.route_id, t.start_stop, t.end_stop, t.start_time, t.end_time,
                 t.distance_km, t.energy_kwh, t.label) for k, t in enumerate(order)]


def build_instance(trips: Sequence[Trip], stops: Mapping[str, tuple[float, float]],
                   n_depots: int = 5, depot_stops: Sequence[str] | None = None,
                   speed_kmh: float = 30.0, detour_factor: float = 1.3,
                   params: CostParams | None = None,
                   override: Mapping[tuple[str, str], float] | None = None,
                   name: str = "") -> Instance:
    params = params or CostParams()
    trips = renumber_trips(trips)
    if not trips:
        raise IngestError("no trips")
    if depot_stops is None:
        depot_stops = select_depots(trips, n_depots)
    depots = tuple(Depot(k, s) for k, s in enumerate(depot_stops))
    used = {t.start_stop for t in trips} | {t.end_stop for t in trips} | set(depot_stops)
    missing = used - set(stops)
    if missing:
        raise IngestError(f"stops without coordinates: {sorted(missing)[:5]}")
    coords = {s: (float(stops[s][0]), float(stops[s][1])) for s in sorted(used)}
    stop_dh = build_deadhead(coords, speed_kmh, detour_factor, params.consumption_rate, override)
    dh = node_deadhead(trips, depots, stop_dh)
    comp = build_compatibility(trips, dh, depots)
    cand = frozenset(t.start_stop for t in trips) | frozenset(t.end_stop for t in trips)
    return Instance(tuple(trips), depots, cand, dh, comp, coords, name)


def unserviceable_trips(instance: Instance, params: CostParams) -> list[int]:
    """Trips whose single-trip round trip from delta(i) breaks the battery window."""
    n = instance.n_trips
    e = instance.deadhead.energy_kwh
    bad = []
    for t in instance.trips:
        d = n + instance.nearest_depot(t.id)
        need = e[d, t.id] + t.energy_kwh + e[t.id, d]
        if need > params.l_max - params.l_min + 1e-9:
            bad.append(t.id)
    return bad
