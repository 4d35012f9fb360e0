"""Minimal GTFS reader: one service day, trips reduced to terminal-to-terminal legs."""
from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..model import Trip
from .geometry import haversine_km

log = logging.getLogger(__name__)

REQUIRED = ("stops.txt", "routes.txt", "trips.txt", "stop_times.txt")
WEEKDAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")


class GtfsError(ValueError):
    pass


@dataclass
class GtfsBundle:
    stops: dict[str, tuple[float, float, str]]
    routes: dict[str, str]
    trips: dict[str, tuple[str, str, str]]  # trip_id -> (route_id, service_id, shape_id)
    stop_times: dict[str, list[tuple[int, int, int, str]]]  # (seq, arr_s, dep_s, stop)
    service_date: str | None = None
    timetable: list[Trip] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def coordinates(self) -> dict[str, tuple[float, float]]:
        return {s: (lat, lon) for s, (lat, lon, _) in self.stops.items()}


def parse_time(text: str) -> int:
    """HH:MM:SS to seconds; hours may exceed 24."""
    parts = text.strip().split(":")
    if len(parts) != 3:
        raise ValueError(f"bad time {text!r}")
    h, m, s = (int(p) for p in parts)
    if h < 0 or not 0 <= m < 60 or not 0 <= s < 61:
        raise ValueError(f"bad time {text!r}")
    return h * 3600 + m * 60 + s


def _rows(path: Path, required: tuple[str, ...]):
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        reader.fieldnames = header
        missing = [c for c in required if c not in header]
        if missing:
            raise GtfsError(f"{path.name}:1: missing columns {missing}")
        for row in reader:
            line = reader.line_num
            clean = {k: (v or "").strip() for k, v in row.items() if k is not None}
            for c in required:
                if not clean.get(c):
                    raise GtfsError(f"{path.name}:{line}: empty required field {c!r}")
            yield line, clean


def _calendar(directory: Path) -> dict[dt.date, set[str]] | None:
    """Active service ids per date; None when no calendar files exist."""
    cal = directory / "calendar.txt"
    cdates = directory / "calendar_dates.txt"
    if not cal.exists() and not cdates.exists():
        return None
    by_date: dict[dt.date, set[str]] = {}
    if cal.exists():
        for line, row in _rows(cal, ("service_id", "start_date", "end_date", *WEEKDAYS)):
            try:
                start = dt.datetime.strptime(row["start_date"], "%Y%m%d").date()
                end = dt.datetime.strptime(row["end_date"], "%Y%m%d").date()
                flags = [int(row[d]) for d in WEEKDAYS]
            except ValueError as exc:
                raise GtfsError(f"calendar.txt:{line}: {exc}") from None
            day = start
            while day <= end:
                if flags[day.weekday()]:
                    by_date.setdefault(day, set()).add(row["service_id"])
                day += dt.timedelta(days=1)
    if cdates.exists():
        for line, row in _rows(cdates, ("service_id", "date", "exception_type")):
            try:
                day = dt.datetime.strptime(row["date"], "%Y%m%d").date()
                kind = int(row["exception_type"])
            except ValueError as exc:
                raise GtfsError(f"calendar_dates.txt:{line}: {exc}") from None
            active = by_date.setdefault(day, set())
            if kind == 1:
                active.add(row["service_id"])
            elif kind == 2:
                active.discard(row["service_id"])
    return by_date


def _busiest_day(by_date, trip_services: dict[str, str]) -> tuple[str | None, set[str] | None]:
    counts: dict[str, int] = {}
    for sid in trip_services.values():
        counts[sid] = counts.get(sid, 0) + 1
    best_day, best_n, best_set = None, -1, None
    for day in sorted(by_date):
        n = sum(counts.get(s, 0) for s in by_date[day])
        if n > best_n:
            best_day, best_n, best_set = day, n, by_date[day]
    if best_day is None:
        return None, None
    return best_day.strftime("%Y%m%d"), set(best_set)


def _shape_lengths(path: Path) -> dict[str, float]:
    pts: dict[str, list[tuple[int, float, float]]] = {}
    for line, row in _rows(path, ("shape_id", "shape_pt_lat", "shape_pt_lon", "shape_pt_sequence")):
        try:
            pts.setdefault(row["shape_id"], []).append(
                (int(row["shape_pt_sequence"]), float(row["shape_pt_lat"]), float(row["shape_pt_lon"])))
        except ValueError as exc:
            raise GtfsError(f"shapes.txt:{line}: {exc}") from None
    out = {}
    for sid, seq in pts.items():
        seq.sort()
        lat = np.array([p[1] for p in seq])
        lon = np.array([p[2] for p in seq])
        out[sid] = float(haversine_km(lat[:-1], lon[:-1], lat[1:], lon[1:]).sum()) if len(seq) > 1 else 0.0
    return out


def parse_gtfs(directory, consumption_rate: float = 1.2, use_shapes: bool = False) -> GtfsBundle:
    """Read a GTFS directory and reduce one service day to terminal-level trips.

    Trip distance is the stop-to-stop haversine sum unless use_shapes is set and
    shapes.txt covers the trip.
    """
    directory = Path(directory)
    for name in REQUIRED:
        if not (directory / name).exists():
            raise GtfsError(f"missing required file {name}")
    warnings: list[str] = []

    stops: dict[str, tuple[float, float, str]] = {}
    for line, row in _rows(directory / "stops.txt", ("stop_id", "stop_lat", "stop_lon")):
        try:
            lat, lon = float(row["stop_lat"]), float(row["stop_lon"])
        except ValueError:
            raise GtfsError(f"stops.txt:{line}: non-numeric coordinates") from None
        if not (math.isfinite(lat) and math.isfinite(lon)) or abs(lat) > 90 or abs(lon) > 180:
            raise GtfsError(f"stops.txt:{line}: invalid coordinates")
        stops[row["stop_id"]] = (lat, lon, row.get("stop_name", ""))

    routes = {row["route_id"]: row.get("route_short_name", "") or row.get("route_long_name", "")
              for _, row in _rows(directory / "routes.txt", ("route_id",))}

    trips: dict[str, tuple[str, str, str]] = {}
    for line, row in _rows(directory / "trips.txt", ("route_id", "service_id", "trip_id")):
        if row["route_id"] not in routes:
            raise GtfsError(f"trips.txt:{line}: unknown route {row['route_id']!r}")
        trips[row["trip_id"]] = (row["route_id"], row["service_id"], row.get("shape_id", ""))

    stop_times: dict[str, list[tuple[int, int, int, str]]] = {}
    cols = ("trip_id", "stop_id", "stop_sequence")
    for line, row in _rows(directory / "stop_times.txt", cols):
        tid = row["trip_id"]
        if tid not in trips:
            msg = f"stop_times.txt:{line}: orphan row for unknown trip {tid!r}"
            warnings.append(msg)
            log.warning(msg)
            continue
        if row["stop_id"] not in stops:
            raise GtfsError(f"stop_times.txt:{line}: unknown stop {row['stop_id']!r}")
        arr_txt = row.get("arrival_time") or row.get("departure_time")
        dep_txt = row.get("departure_time") or row.get("arrival_time")
        if not arr_txt:
            continue  # untimed intermediate stop
        try:
            seq = int(row["stop_sequence"])
            arr, dep = parse_time(arr_txt), parse_time(dep_txt)
        except ValueError as exc:
            raise GtfsError(f"stop_times.txt:{line}: {exc}") from None
        stop_times.setdefault(tid, []).append((seq, arr, dep, row["stop_id"]))
    for seq in stop_times.values():
        seq.sort()

    service_date, active = None, None
    by_date = _calendar(directory)
    if by_date is not None:
        service_date, active = _busiest_day(by_date, {t: v[1] for t, v in trips.items()})

    shapes = {}
    if use_shapes and (directory / "shapes.txt").exists():
        shapes = _shape_lengths(directory / "shapes.txt")

    timetable: list[Trip] = []
    for tid in sorted(trips):
        route_id, service_id, shape_id = trips[tid]
        if active is not None and service_id not in active:
            continue
        seq = stop_times.get(tid, [])
        if len(seq) < 2:
            msg = f"trip {tid!r} has {len(seq)} timed stop_times; skipped"
            warnings.append(msg)
            log.warning(msg)
            continue
        alpha = seq[0][2] // 60
        beta = -(-seq[-1][1] // 60)
        if beta <= alpha:
            msg = f"trip {tid!r} has non-positive duration; skipped"
            warnings.append(msg)
            log.warning(msg)
            continue
        if shape_id and shape_id in shapes:
            km = shapes[shape_id]
        else:
            lat = np.array([stops[s[3]][0] for s in seq])
            lon = np.array([stops[s[3]][1] for s in seq])
            km = float(haversine_km(lat[:-1], lon[:-1], lat[1:], lon[1:]).sum())
        timetable.append(Trip(len(timetable), route_id, seq[0][3], seq[-1][3], int(alpha), int(beta),
                              km, km * consumption_rate, tid))
    return GtfsBundle(stops, routes, trips, stop_times, service_date, timetable, warnings)


def read_distance_override(path) -> dict[tuple[str, str], float]:
    """CSV with columns from_stop,to_stop,km."""
    out = {}
    path = Path(path)
    for line, row in _rows(path, ("from_stop", "to_stop", "km")):
        try:
            out[(row["from_stop"], row["to_stop"])] = float(row["km"])
        except ValueError:
            raise GtfsError(f"{path.name}:{line}: non-numeric km") from None
    return out
