"""Seeded synthetic network generator for desk-scale experiments."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..model import CostParams, Instance, Trip
from .build import IngestError, build_instance, unserviceable_trips
from .geometry import haversine_km

BASE_LAT, BASE_LON = 42.28, -83.74
KM_PER_DEG = 111.195


@dataclass(frozen=True)
class SyntheticSpec:
    seed: int = 1
    n_trips: int = 50
    n_terminals: int = 8
    n_depots: int = 2
    service_span: tuple[int, int] = (300, 1380)
    trip_duration: tuple[int, int] = (25, 75)
    headway: str = "uniform"  # uniform | exponential
    extent_km: float = 12.0
    service_speed_kmh: float = 20.0
    route_detour: float = 1.4

    def __post_init__(self):
        if self.n_trips < 1:
            raise IngestError("n_trips must be >= 1")
        if self.n_terminals < 1 or self.n_depots < 1:
            raise IngestError("need at least one terminal and one depot")
        if self.extent_km <= 0 or self.service_speed_kmh <= 0:
            raise IngestError("extents must be positive")
        lo, hi = self.trip_duration
        if not 0 < lo <= hi:
            raise IngestError("bad trip_duration range")
        if not self.service_span[0] < self.service_span[1]:
            raise IngestError("bad service_span")
        if self.headway not in ("uniform", "exponential"):
            raise IngestError(f"unknown headway distribution {self.headway!r}")


def _terminals(rng: np.random.Generator, spec: SyntheticSpec) -> dict[str, tuple[float, float]]:
    xy = rng.uniform(0.0, spec.extent_km, size=(spec.n_terminals, 2))
    coslat = math.cos(math.radians(BASE_LAT))
    return {f"T{k:02d}": (BASE_LAT + y / KM_PER_DEG, BASE_LON + x / (KM_PER_DEG * coslat))
            for k, (x, y) in enumerate(xy)}


def _routes(rng: np.random.Generator, names: list[str]) -> list[tuple[str, str]]:
    if len(names) == 1:
        return [(names[0], names[0])]
    order = list(rng.permutation(len(names)))
    pairs = [(names[order[k]], names[order[k + 1]]) for k in range(0, len(order) - 1, 2)]
    if len(order) % 2:
        other = int(rng.integers(0, len(order) - 1))
        pairs.append((names[order[-1]], names[order[other]]))
    return pairs


def generate_synthetic(spec: SyntheticSpec, params: CostParams | None = None,
                       max_retries: int = 50) -> Instance:
    """Deterministic for a fixed seed; every trip is a feasible single-trip rotation."""
    params = params or CostParams()
    rng = np.random.default_rng(spec.seed)
    stops = _terminals(rng, spec)
    names = sorted(stops)
    routes = _routes(rng, names)
    n_dir = 2 * len(routes)
    per_leg = [spec.n_trips // n_dir + (1 if k < spec.n_trips % n_dir else 0) for k in range(n_dir)]
    start, end = spec.service_span
    lo, hi = spec.trip_duration

    def leg_trip(leg: int, when: float, label: str, budget: float) -> Trip:
        a, b = routes[leg // 2]
        if leg % 2:
            a, b = b, a
        direct = float(haversine_km(stops[a][0], stops[a][1], stops[b][0], stops[b][1]))
        km = max(direct * spec.route_detour, 1.0)
        minutes = km / spec.service_speed_kmh * 60.0
        minutes = min(max(minutes * float(rng.uniform(0.9, 1.1)), lo), hi)
        km = min(km, minutes / 60.0 * spec.service_speed_kmh * 1.5)
        energy = km * params.consumption_rate
        if energy > budget:
            km = budget / params.consumption_rate
            energy = budget
        alpha = int(round(when))
        return Trip(0, f"R{leg // 2:02d}", a, b, alpha, alpha + max(1, int(round(minutes))),
                    km, energy, label)

    trips: list[Trip] = []
    for leg, count in enumerate(per_leg):
        if count == 0:
            continue
        span = end - start
        mean_h = span / count
        if spec.headway == "uniform":
            gaps = rng.uniform(0.6, 1.4, size=count) * mean_h
        else:
            gaps = rng.exponential(mean_h, size=count)
        times = start + rng.uniform(0, mean_h) + np.concatenate([[0.0], np.cumsum(gaps[:-1])])
        times = start + (times - start) % span
        for k, when in enumerate(np.sort(times)):
            trips.append(leg_trip(leg, float(when), f"S{leg:02d}-{k:03d}", params.usable_kwh))

    for attempt in range(max_retries + 1):
        inst = build_instance(trips, stops, n_depots=spec.n_depots, params=params,
                              name=f"synthetic-{spec.seed}-{spec.n_trips}")
        bad = unserviceable_trips(inst, params)
        if not bad:
            return inst
        if attempt == max_retries:
            break
        # shrink offending trips until their depot round trip fits the battery window
        labels = {inst.trips[i].label for i in bad}
        fixed = []
        for t in trips:
            if t.label in labels:
                km = t.distance_km * 0.8
                t = Trip(0, t.route_id, t.start_stop, t.end_stop, t.start_time, t.end_time,
                         km, km * params.consumption_rate, t.label)
            fixed.append(t)
        trips = fixed
    raise IngestError(f"synthetic spec infeasible after {max_retries} retries")
