"""Shared fixtures: toy instances small enough for exhaustive oracles."""
from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ebusopt.ingest import build_instance
from ebusopt.model import CostParams, Trip

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# small battery so a handful of 15-32 km trips already needs charging
TOY_PARAMS = CostParams(l_max=100.0, l_min=20.0)


def toy_instance(seed: int, n_trips: int = 5, n_depots: int = 2, n_cand: int = 2, params=TOY_PARAMS):
    """Three terminals A/B/C a couple of km apart, random trips between them."""
    rng = np.random.default_rng(seed)
    names = ["A", "B", "C"]
    stops = {s: (42.28 + 0.02 * rng.uniform(), -83.74 + 0.03 * rng.uniform()) for s in names}
    trips = []
    for k in range(n_trips):
        a, b = rng.choice(3, 2, replace=False)
        start = int(rng.integers(360, 600))
        dur = int(rng.integers(30, 70))
        km = float(rng.uniform(15, 32))
        trips.append(Trip(k, "R", names[a], names[b], start, start + dur, km, km * params.consumption_rate, f"t{k}"))
    inst = build_instance(trips, stops, n_depots=n_depots, params=params, name=f"toy-{seed}")
    return replace(inst, candidate_stations=frozenset(sorted(inst.candidate_stations)[:n_cand]))


def line_instance(trips_spec, stops, n_depots=1, depot_stops=None, params=None, speed_kmh=30.0, detour=1.0):
    """Instance from (start_stop, end_stop, start, end, km) tuples."""
    params = params or CostParams()
    trips = [Trip(k, "R", a, b, s, e, km, km * params.consumption_rate, f"t{k}")
             for k, (a, b, s, e, km) in enumerate(trips_spec)]
    return build_instance(trips, stops, n_depots=n_depots, depot_stops=depot_stops, speed_kmh=speed_kmh,
                          detour_factor=detour, params=params)


@pytest.fixture
def toy_params():
    return TOY_PARAMS


def chain_case(seed: int, max_trips: int = 8, max_stations: int = 3, params=TOY_PARAMS):
    """A random instance whose trips form one compatible chain, plus a station subset.

    Returns (instance, rotation, stations). Gaps always exceed the largest
    deadhead so every consecutive pair is compatible.
    """
    from ebusopt.model import Rotation

    rng = np.random.default_rng(seed)
    names = ["A", "B", "C", "D"]
    stops = {s: (42.28 + 0.03 * rng.uniform(), -83.74 + 0.04 * rng.uniform()) for s in names}
    n = int(rng.integers(1, max_trips + 1))
    trips, t = [], int(rng.integers(300, 500))
    for k in range(n):
        a, b = rng.choice(4, 2, replace=False)
        dur = int(rng.integers(20, 60))
        km = float(rng.uniform(8, 40))
        trips.append(Trip(k, "R", names[a], names[b], t, t + dur, km, km * params.consumption_rate, f"t{k}"))
        t += dur + 15 + int(rng.integers(0, 30))
    inst = build_instance(trips, stops, n_depots=2, params=params, name=f"chain-{seed}")
    assert all(inst.compat[k, k + 1] for k in range(n - 1))
    cand = sorted(inst.candidate_stations)
    k = int(rng.integers(0, min(max_stations, len(cand)) + 1))
    stations = frozenset(rng.choice(cand, k, replace=False).tolist()) if k else frozenset()
    d0, d1 = (int(x) for x in rng.integers(0, inst.n_depots, 2))
    return inst, Rotation(0, d0, tuple(range(n)), d1), stations


def csp_case(seed: int, max_buses: int = 5, params=TOY_PARAMS, max_trips: int = 4):
    """Up to max_buses interleaved chains over four terminals, CAG-feasible under the returned stations.

    Returns (instance, rotations, stations) or None when the draw is unservable.
    """
    from ebusopt.feasibility import is_rotation_charge_feasible
    from ebusopt.model import Rotation

    rng = np.random.default_rng(seed)
    names = ["A", "B", "C", "D"]
    stops = {s: (42.28 + 0.03 * rng.uniform(), -83.74 + 0.04 * rng.uniform()) for s in names}
    n_bus = int(rng.integers(1, max_buses + 1))
    trips, chains = [], []
    for _ in range(n_bus):
        t = int(rng.integers(420, 560))
        chain = []
        for _ in range(int(rng.integers(2, max_trips + 1))):
            a, b = rng.choice(4, 2, replace=False)
            dur = int(rng.integers(20, 50))
            km = float(rng.uniform(10, 30))
            chain.append(len(trips))
            trips.append(Trip(len(trips), "R", names[a], names[b], t, t + dur, km,
                              km * params.consumption_rate, f"t{len(trips)}"))
            t += dur + 15 + int(rng.integers(0, 25))
        chains.append(chain)
    inst = build_instance(trips, stops, n_depots=2, params=params, name=f"csp-{seed}")
    # build_instance renumbers by start time; map labels back to the new ids
    ids = {t.label: t.id for t in inst.trips}
    k = int(rng.integers(1, 4))
    stations = frozenset(rng.choice(names, k, replace=False).tolist())
    rots = []
    for b, chain in enumerate(chains):
        d = int(rng.integers(0, inst.n_depots))
        rots.append(Rotation(b, d, tuple(ids[f"t{c}"] for c in chain), d))
    if not all(is_rotation_charge_feasible(r, stations, params, inst).feasible for r in rots):
        return None
    return inst, rots, stations


def csp_cases(n: int, start: int = 0, **kw):
    """The first n servable csp_case draws from seed `start` on."""
    out, seed = [], start
    while len(out) < n:
        case = csp_case(seed, **kw)
        if case is not None:
            out.append((seed, *case))
        seed += 1
    return out


# -- acceptance report ---------------------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def report_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
