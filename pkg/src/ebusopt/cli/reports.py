"""Report files written by `run`. Floats in CSVs carry 6 decimals, JSON uses sorted keys."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
from collections import defaultdict
from pathlib import Path
from typing import Sequence

from ..csp import ChargeSchedule
from ..model import CostParams, Instance, PricingSchedule, Rotation, deadhead_cost, deadhead_km, to_dollars
from .trace import BusReplay, replay

SOLUTION = "solution.json"
SCHEDULE = "schedule.json"
INSTANCE = "instance.json"
ROTATIONS = "rotations.csv"


def f6(x: float) -> str:
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def r6(x: float) -> float:
    return round(float(x), 6) + 0.0


def dump_json(data, path: Path) -> None:
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


# -- parameters ----------------------------------------------------------------

def params_to_dict(params: CostParams) -> dict:
    data = dataclasses.asdict(params)
    data["pricing"] = [list(p) for p in sorted(params.pricing.periods)]
    return data


def params_from_dict(data: dict) -> CostParams:
    data = dict(data)
    data["pricing"] = PricingSchedule(tuple((int(a), int(b), float(p)) for a, b, p in data["pricing"]))
    return CostParams(**data)


# -- cost accounting -------------------------------------------------------------

def cost_components(rotations: Sequence[Rotation], stations, schedule: ChargeSchedule,
                    instance: Instance, params: CostParams) -> dict[str, int]:
    """Milli-dollar components in the order of the cost-breakdown table."""
    return {
        "bus_acquisition": len(rotations) * int(round(params.c_bus * 1000)),
        "facility_opening": len(frozenset(stations)) * int(round(params.c_loc * 1000)),
        "deadhead": deadhead_cost(rotations, instance, params),
        "csp": schedule.total,
    }


def cost_breakdown(rotations, stations, schedule: ChargeSchedule, instance, params, mode: str) -> dict:
    comp = cost_components(rotations, stations, schedule, instance, params)
    total = sum(comp.values())
    shares = {k: r6(100.0 * v / total) if total else 0.0 for k, v in comp.items()}
    return {
        "mode": mode,
        "instance": instance.name,
        "total_usd": r6(to_dollars(total)),
        "components_usd": {k: r6(to_dollars(v)) for k, v in comp.items()},
        "csp_detail_usd": {"electricity": r6(to_dollars(schedule.elec_cost)),
                           "capacity": r6(to_dollars(schedule.cap_cost))},
        "shares_pct": shares,
        "counts": {"buses": len(rotations), "stations": len(frozenset(stations)), "trips": instance.n_trips,
                   "deadhead_km": r6(deadhead_km(rotations, instance))},
    }


# -- serialized solution -----------------------------------------------------------

def schedule_to_dict(s: ChargeSchedule) -> dict:
    return {
        "strategy": s.strategy,
        "status": s.status,
        "transfers": [[b, st, t, v] for (b, st, t), v in sorted(s.transfers.items()) if v > 0],
        "station_caps_kw": {k: s.station_caps[k] for k in sorted(s.station_caps)},
        "dual_splits": [[b, k, a, c] for (b, k), (a, c) in sorted(s.dual_splits.items())],
        "electricity_milli": s.elec_cost,
        "capacity_milli": s.cap_cost,
    }


def schedule_from_dict(data: dict) -> ChargeSchedule:
    return ChargeSchedule(
        data["strategy"],
        transfers={(int(b), st, int(t)): float(v) for b, st, t, v in data["transfers"]},
        station_caps={k: float(v) for k, v in data["station_caps_kw"].items()},
        dual_splits={(int(b), int(k)): (int(a), int(c)) for b, k, a, c in data.get("dual_splits", [])},
        elec_cost=int(data.get("electricity_milli", 0)),
        cap_cost=int(data.get("capacity_milli", 0)),
        status=data.get("status", "Optimal"),
    )


def rotation_rows(rotations: Sequence[Rotation], instance: Instance):
    for r in rotations:
        for seq, t in enumerate(r.trips):
            trip = instance.trips[t]
            yield [r.bus_id, seq, t, trip.label, trip.start_stop, trip.end_stop, trip.start_time,
                   trip.end_time, r.start_depot, r.end_depot]


ROTATION_HEADER = ["bus", "seq", "trip", "label", "start_stop", "end_stop", "start_minute", "end_minute",
                   "start_depot", "end_depot"]


def read_rotations(path: Path) -> list[Rotation]:
    """Parse rotations.csv; trips keep file order within a bus after sorting by seq."""
    buses: dict[int, list[tuple[int, int, int, int]]] = defaultdict(list)
    with path.open(newline="", encoding="utf-8") as fh:
        for line, row in enumerate(csv.DictReader(fh), start=2):
            try:
                buses[int(row["bus"])].append((int(row["seq"]), int(row["trip"]), int(row["start_depot"]),
                                               int(row["end_depot"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line}: malformed row ({exc})") from exc
    out = []
    for b in sorted(buses):
        rows = sorted(buses[b])
        depots = {(s, e) for _, _, s, e in rows}
        if len(depots) != 1:
            raise ValueError(f"{path}: bus {b} lists more than one depot pair")
        (s, e), = depots
        out.append(Rotation(b, s, tuple(t for _, t, _, _ in rows), e))
    return out


# -- plot data ---------------------------------------------------------------------

def charging_rows(schedule: ChargeSchedule):
    for (b, st, t), v in sorted(schedule.transfers.items()):
        if v > 0:
            yield [b, st, t, f6(v)]


def station_power_rows(schedule: ChargeSchedule, stations):
    load: dict[str, dict[int, float]] = defaultdict(lambda: defaultdict(float))
    for (_, st, t), v in schedule.transfers.items():
        if v > 0:
            load[st][t] += v
    for st in sorted(set(stations) | set(load)):
        d = load.get(st)
        cap = schedule.station_caps.get(st, 0.0)
        if not d:
            continue
        for t in range(min(d), max(d) + 1):
            yield [st, t, f6(60.0 * d.get(t, 0.0)), f6(cap)]


def energy_rows(replays: Sequence[BusReplay]):
    for rep in replays:
        for minute, event, level in rep.points:
            yield [rep.bus, minute, event, f6(level)]


def activity_rows(replays: Sequence[BusReplay]):
    tot = [0, 0, 0, 0, 0]
    for rep in replays:
        idle = rep.span - rep.service_min - rep.deadhead_min - rep.charging_min
        row = [rep.service_min, rep.deadhead_min, rep.charging_min, idle, rep.span]
        tot = [a + b for a, b in zip(tot, row)]
        yield [rep.bus, *row]
    yield ["total", *tot]


def write_reports(out: Path, instance: Instance, params: CostParams, mode: str, rotations, stations,
                  schedule: ChargeSchedule, log: list[dict], total_milli: int, extra: dict,
                  reports: Sequence[str]) -> list[str]:
    """Write every requested report plus the solution files; returns the file names."""
    from ..ingest.store import save_instance

    out.mkdir(parents=True, exist_ok=True)
    written = []

    def mark(name):
        written.append(name)
        return out / name

    save_instance(instance, mark(INSTANCE))
    dump_json(schedule_to_dict(schedule), mark(SCHEDULE))
    write_csv(mark(ROTATIONS), ROTATION_HEADER, rotation_rows(rotations, instance))
    dump_json({"mode": mode, "open_stations": sorted(stations), "n_buses": len(rotations),
               "objective_milli": int(total_milli), "objective_usd": r6(to_dollars(total_milli)),
               "params": params_to_dict(params), **extra}, mark(SOLUTION))
    reps = replay(rotations, schedule.transfers, instance, params)
    if "cost_breakdown" in reports:
        dump_json(cost_breakdown(rotations, stations, schedule, instance, params, mode), mark("cost_breakdown.json"))
    if "charging_events" in reports:
        write_csv(mark("charging_events.csv"), ["bus", "station", "minute", "kwh"], charging_rows(schedule))
    if "station_power" in reports:
        write_csv(mark("station_power.csv"), ["station", "minute", "kw", "capacity_kw"],
                  station_power_rows(schedule, stations))
    if "energy_trace" in reports:
        write_csv(mark("energy_trace.csv"), ["bus", "minute", "event", "kwh"], energy_rows(reps))
    if "activity_summary" in reports:
        write_csv(mark("activity_summary.csv"),
                  ["bus", "service_min", "deadhead_min", "charging_min", "idle_min", "span_min"],
                  activity_rows(reps))
    if "convergence" in reports:
        dump_json([{"iteration": e["iteration"], "move": e["move"],
                    "savings_usd": r6(to_dollars(e["savings"])), "objective_usd": r6(to_dollars(e["objective"]))}
                   for e in log], mark("convergence.json"))
    return written
