"""Instance persistence as JSON (field-exact round trip)."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..model import DeadheadMatrix, Depot, Instance, Trip

FORMAT = "ebusopt-instance/1"


def instance_to_dict(inst: Instance) -> dict:
    dh = inst.deadhead
    return {
        "format": FORMAT,
        "name": inst.name,
        "trips": [[t.id, t.route_id, t.start_stop, t.end_stop, t.start_time, t.end_time,
                   t.distance_km, t.energy_kwh, t.label] for t in inst.trips],
        "depots": [[d.id, d.stop] for d in inst.depots],
        "candidate_stations": sorted(inst.candidate_stations),
        "stops": {s: list(inst.stops[s]) for s in sorted(inst.stops)},
        "deadhead": {
            "duration_min": dh.duration_min.tolist(),
            "distance_km": dh.distance_km.tolist(),
            "energy_kwh": dh.energy_kwh.tolist(),
            "idle_min": dh.idle_min.tolist(),
        },
        "compat": [[int(i), int(j)] for i, j in zip(*np.nonzero(inst.compat))],
    }


def instance_from_dict(data: dict) -> Instance:
    if data.get("format") != FORMAT:
        raise ValueError(f"unsupported instance format {data.get('format')!r}")
    trips = tuple(Trip(int(r[0]), r[1], r[2], r[3], int(r[4]), int(r[5]), float(r[6]),
                       float(r[7]), r[8]) for r in data["trips"])
    depots = tuple(Depot(int(k), s) for k, s in data["depots"])
    d = data["deadhead"]
    dh = DeadheadMatrix(np.array(d["duration_min"], dtype=np.int64).reshape(len(trips) + len(depots), -1),
                        np.array(d["distance_km"], dtype=float).reshape(len(trips) + len(depots), -1),
                        np.array(d["energy_kwh"], dtype=float).reshape(len(trips) + len(depots), -1),
                        np.array(d["idle_min"], dtype=np.int64).reshape(len(trips) + len(depots), -1))
    comp = np.zeros((len(trips), len(trips)), dtype=bool)
    for i, j in data["compat"]:
        comp[i, j] = True
    stops = {s: (float(v[0]), float(v[1])) for s, v in data["stops"].items()}
    return Instance(trips, depots, frozenset(data["candidate_stations"]), dh, comp, stops,
                    data.get("name", ""))


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), sort_keys=True) + "\n")


def load_instance(path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text()))


def instances_equal(a: Instance, b: Instance) -> bool:
    return instance_to_dict(a) == instance_to_dict(b)
