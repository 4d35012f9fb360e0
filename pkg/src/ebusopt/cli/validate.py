"""Independent re-check of a run directory."""
from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path

from ..feasibility import is_rotation_charge_feasible
from ..ingest import load_instance
from ..model import Rotation, deadhead_cost
from .reports import INSTANCE, ROTATIONS, SCHEDULE, SOLUTION, params_from_dict, read_rotations, schedule_from_dict
from .trace import replay

TOL = 1e-6


def check_plan(rotations: list[Rotation], stations: frozenset, instance, params) -> list[str]:
    issues = []
    n, m = instance.n_trips, instance.n_depots
    served: dict[int, list[int]] = defaultdict(list)
    for r in rotations:
        for t in r.trips:
            served[t].append(r.bus_id)
    for t in sorted(served):
        if not 0 <= t < n:
            issues.append(f"partition: bus {served[t][0]} serves unknown trip {t}")
        elif len(served[t]) > 1:
            issues.append(f"partition: trip {t} served {len(served[t])} times (buses {served[t]})")
    missing = [t for t in range(n) if t not in served]
    if missing:
        issues.append(f"partition: trip {missing[0]} not served ({len(missing)} missing)")
    balance: dict[int, int] = defaultdict(int)
    for r in rotations:
        for d in (r.start_depot, r.end_depot):
            if not 0 <= d < m:
                issues.append(f"depot: bus {r.bus_id} uses unknown depot {d}")
        balance[r.start_depot] += 1
        balance[r.end_depot] -= 1
    for d in sorted(balance):
        if balance[d]:
            issues.append(f"depot balance: depot {d} has {balance[d]:+d} net departures")
    for r in rotations:
        for i, k in zip(r.trips, r.trips[1:]):
            if 0 <= i < n and 0 <= k < n and not instance.compat[i, k]:
                issues.append(f"compatibility: bus {r.bus_id} cannot run trip {k} after trip {i}")
    extra = sorted(stations - instance.candidate_stations)
    if extra:
        issues.append(f"stations: {extra[0]} is not a candidate stop")
    if issues:
        return issues
    for r in rotations:
        rep = is_rotation_charge_feasible(r, stations, params, instance)
        if not rep.feasible:
            issues.append(f"charge feasibility: bus {r.bus_id} fails after trip position {rep.feasible_till_trip}")
    return issues


def check_schedule(rotations: list[Rotation], stations: frozenset, sched, instance, params) -> list[str]:
    issues = []
    rate = min(params.charge_rate_max, params.transfer_max)
    buses = {r.bus_id for r in rotations}
    load: dict[tuple[str, int], float] = defaultdict(float)
    for (b, s, t), v in sorted(sched.transfers.items()):
        if b not in buses:
            issues.append(f"schedule: transfer for unknown bus {b}")
        if s not in stations:
            issues.append(f"schedule: bus {b} charges at {s}, which is not open")
        if v < -TOL or v > rate + TOL:
            issues.append(f"bound: bus {b} transfers {v:.6f} kWh at {s} minute {t}, limit {rate}")
        load[(s, t)] += v
    for (s, t), v in sorted(load.items()):
        q = sched.station_caps.get(s, 0.0)
        if 60.0 * v > q + TOL:
            issues.append(f"capacity: station {s} minute {t} draws {60.0 * v:.6f} kW above q_s = {q:.6f}")
    got: dict[int, float] = defaultdict(float)
    for (b, _, _), v in sched.transfers.items():
        got[b] += v
    for rep in replay(rotations, sched.transfers, instance, params, TOL):
        issues.extend(rep.problems)
        final = rep.points[-1][2]
        expect = params.l_max - rep.consumed + rep.charged
        if abs(final - expect) > TOL or abs(rep.charged - got.get(rep.bus, 0.0)) > TOL:
            issues.append(f"energy conservation: bus {rep.bus} ends at {final:.6f} kWh, balance gives {expect:.6f}")
    return issues


def recompute_objective(rotations, stations, sched, instance, params) -> float:
    """Total cost in dollars computed directly from the plan and the transfers."""
    elec = sum(params.pricing.price(t) * v for (_, _, t), v in sched.transfers.items()) * params.lifetime_scale
    cap = params.c_cap * sum(sched.station_caps.values())
    return (len(rotations) * params.c_bus + len(stations) * params.c_loc
            + deadhead_cost(rotations, instance, params) / 1000.0 + elec + cap)


def validate_dir(path) -> list[str]:
    path = Path(path)
    try:
        instance = load_instance(path / INSTANCE)
        solution = json.loads((path / SOLUTION).read_text(encoding="utf-8"))
        params = params_from_dict(solution["params"])
        sched = schedule_from_dict(json.loads((path / SCHEDULE).read_text(encoding="utf-8")))
        rotations = read_rotations(path / ROTATIONS)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        return [f"unreadable solution files: {exc}"]
    stations = frozenset(solution["open_stations"])
    issues = check_plan(rotations, stations, instance, params)
    if issues:
        return issues
    issues = check_schedule(rotations, stations, sched, instance, params)
    value = recompute_objective(rotations, stations, sched, instance, params)
    stored = solution["objective_milli"] / 1000.0
    if abs(value - stored) > TOL * max(1.0, abs(stored)):
        issues.append(f"objective: recomputed {value:.6f} differs from reported {stored:.6f}")
    return issues
