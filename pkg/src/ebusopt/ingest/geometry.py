"""Great-circle geometry and deadhead matrices."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..model import DeadheadMatrix, Depot, Trip

EARTH_RADIUS_KM = 6371.0088
_EPS = 1e-9


class GeometryError(ValueError):
    pass


def haversine_km(lat1, lon1, lat2, lon2):
    """Vectorized haversine distance; accepts scalars or numpy arrays."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(lon2) - np.radians(lon1)
    a = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def check_coordinates(stops: Mapping[str, tuple[float, float]]) -> None:
    for sid, (lat, lon) in stops.items():
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise GeometryError(f"stop {sid}: non-finite coordinates")
        if abs(lat) > 90 or abs(lon) > 180:
            raise GeometryError(f"stop {sid}: coordinates out of range ({lat}, {lon})")


def travel_minutes(distance_km, speed_kmh: float):
    """Deadhead duration rounded up to whole minutes."""
    minutes = np.asarray(distance_km, dtype=float) / speed_kmh * 60.0
    return np.ceil(minutes - _EPS).clip(min=0).astype(np.int64)


@dataclass(frozen=True)
class StopDeadhead:
    stop_ids: tuple[str, ...]
    distance_km: np.ndarray
    duration_min: np.ndarray
    energy_kwh: np.ndarray

    def index(self) -> dict[str, int]:
        return {s: k for k, s in enumerate(self.stop_ids)}


def build_deadhead(stops: Mapping[str, tuple[float, float]], speed_kmh: float = 30.0,
                   detour_factor: float = 1.3, consumption_rate: float = 1.2,
                   override: Mapping[tuple[str, str], float] | None = None) -> StopDeadhead:
    """Stop-to-stop deadhead distance, duration and energy.

    Entries in override are used verbatim (km) for the given ordered pairs.
    """
    if speed_kmh <= 0:
        raise GeometryError("speed_kmh must be positive")
    check_coordinates(stops)
    ids = tuple(sorted(stops))
    lat = np.array([stops[s][0] for s in ids], dtype=float)
    lon = np.array([stops[s][1] for s in ids], dtype=float)
    km = haversine_km(lat[:, None], lon[:, None], lat[None, :], lon[None, :]) * detour_factor
    np.fill_diagonal(km, 0.0)
    if override:
        pos = {s: k for k, s in enumerate(ids)}
        for (a, b), value in override.items():
            if a in pos and b in pos:
                if not (math.isfinite(value) and value >= 0):
                    raise GeometryError(f"override {a}->{b}: invalid distance {value}")
                km[pos[a], pos[b]] = value
    return StopDeadhead(ids, km, travel_minutes(km, speed_kmh), km * consumption_rate)


def node_deadhead(trips: Sequence[Trip], depots: Sequence[Depot],
                  stop_dh: StopDeadhead) -> DeadheadMatrix:
    """Expand a stop-level matrix to trip/depot nodes and derive idle times."""
    pos = stop_dh.index()
    n, m = len(trips), len(depots)
    end_idx = np.array([pos[t.end_stop] for t in trips] + [pos[d.stop] for d in depots], dtype=np.int64)
    start_idx = np.array([pos[t.start_stop] for t in trips] + [pos[d.stop] for d in depots], dtype=np.int64)
    dist = stop_dh.distance_km[np.ix_(end_idx, start_idx)].copy()
    dur = stop_dh.duration_min[np.ix_(end_idx, start_idx)].copy()
    energy = stop_dh.energy_kwh[np.ix_(end_idx, start_idx)].copy()
    idle = np.zeros((n + m, n + m), dtype=np.int64)
    if n:
        alpha = np.array([t.start_time for t in trips], dtype=np.int64)
        beta = np.array([t.end_time for t in trips], dtype=np.int64)
        slack = alpha[None, :] - beta[:, None] - dur[:n, :n]
        idle[:n, :n] = np.maximum(slack, 0)
        np.fill_diagonal(idle[:n, :n], 0)
    return DeadheadMatrix(dur, dist, energy, idle)
