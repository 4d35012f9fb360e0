import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ebusopt.ingest import (GtfsError, IngestError, SyntheticSpec, build_compatibility, build_deadhead,
                            build_instance, generate_synthetic, instances_equal, load_instance, min_fleet_bound,
                            parse_gtfs, read_distance_override, save_instance, select_depots,
                            unserviceable_trips)
from ebusopt.ingest.geometry import EARTH_RADIUS_KM, node_deadhead
from ebusopt.model import CostParams, Depot, Trip


def write_feed(d, stop_times, extra_trips=()):
    (d / "stops.txt").write_text("stop_id,stop_name,stop_lat,stop_lon\n"
                                 "S1,One,42.2800,-83.7400\nS2,Two,42.2900,-83.7300\nS3,Three,42.3000,-83.7500\n")
    (d / "routes.txt").write_text("route_id,route_short_name\nR1,1\n")
    rows = ["route_id,service_id,trip_id", "R1,WK,T1", "R1,WK,T2", *extra_trips]
    (d / "trips.txt").write_text("\n".join(rows) + "\n")
    (d / "stop_times.txt").write_text("trip_id,arrival_time,departure_time,stop_id,stop_sequence\n"
                                      + "\n".join(stop_times) + "\n")
    return d


BASE = ["T1,08:00:00,08:00:00,S1,1", "T1,08:20:00,08:20:00,S2,2", "T1,08:45:00,08:45:00,S3,3",
        "T2,09:10:00,09:10:00,S3,1", "T2,09:50:00,09:50:00,S1,2"]


def test_two_trip_feed(tmp_path):
    b = parse_gtfs(write_feed(tmp_path, BASE))
    assert [(t.label, t.start_stop, t.end_stop, t.start_time, t.end_time) for t in b.timetable] == [
        ("T1", "S1", "S3", 480, 525), ("T2", "S3", "S1", 550, 590)]
    assert not b.warnings


def test_trip_crossing_midnight(tmp_path):
    rows = BASE[:3] + ["T2,24:30:00,24:30:00,S3,1", "T2,25:10:00,25:10:00,S1,2"]
    b = parse_gtfs(write_feed(tmp_path, rows))
    assert b.timetable[1].end_time == 1510


def test_orphan_stop_time_row_warns(tmp_path):
    b = parse_gtfs(write_feed(tmp_path, BASE + ["T9,10:00:00,10:00:00,S1,1"]))
    assert len(b.timetable) == 2
    assert len(b.warnings) == 1 and "T9" in b.warnings[0]


def test_trip_distance_is_stop_to_stop_haversine(tmp_path):
    b = parse_gtfs(write_feed(tmp_path, BASE), consumption_rate=2.0)
    c = b.coordinates()
    want = oracle_km(c["S1"], c["S2"]) + oracle_km(c["S2"], c["S3"])
    assert b.timetable[0].distance_km == pytest.approx(want, rel=1e-9)
    assert b.timetable[0].energy_kwh == pytest.approx(2.0 * want)


def test_gtfs_errors(tmp_path):
    with pytest.raises(GtfsError, match="missing required file"):
        parse_gtfs(tmp_path)
    write_feed(tmp_path, BASE + ["T1,08:50:00,08:50:00,S7,4"])
    with pytest.raises(GtfsError, match="unknown stop"):
        parse_gtfs(tmp_path)
    write_feed(tmp_path, ["T1,8:xx:00,08:00:00,S1,1"])
    with pytest.raises(GtfsError, match="stop_times.txt:2"):
        parse_gtfs(tmp_path)


def test_busiest_service_day(tmp_path):
    write_feed(tmp_path, BASE + ["T3,11:00:00,11:00:00,S1,1", "T3,11:30:00,11:30:00,S2,2"], ["R1,SAT,T3"])
    (tmp_path / "calendar.txt").write_text(
        "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,start_date,end_date\n"
        "WK,1,1,1,1,1,0,0,20240101,20240107\nSAT,0,0,0,0,0,1,0,20240101,20240107\n")
    b = parse_gtfs(tmp_path)
    assert [t.label for t in b.timetable] == ["T1", "T2"]


def test_distance_override(tmp_path):
    p = tmp_path / "km.csv"
    p.write_text("from_stop,to_stop,km\nA,B,4.5\n")
    assert read_distance_override(p) == {("A", "B"): 4.5}
    dh = build_deadhead({"A": (42.0, -83.0), "B": (42.1, -83.0)}, override={("A", "B"): 4.5})
    assert dh.distance_km[0, 1] == 4.5 and dh.distance_km[1, 0] > 10


# -- deadhead -----------------------------------------------------------------

def oracle_km(p, q):
    """Spherical distance through the atan2 form, independent of the library code."""
    la1, lo1, la2, lo2 = map(math.radians, (*p, *q))
    dl = lo2 - lo1
    num = math.hypot(math.cos(la2) * math.sin(dl),
                     math.cos(la1) * math.sin(la2) - math.sin(la1) * math.cos(la2) * math.cos(dl))
    den = math.sin(la1) * math.sin(la2) + math.cos(la1) * math.cos(la2) * math.cos(dl)
    return EARTH_RADIUS_KM * math.atan2(num, den)


def test_self_deadhead_is_zero():
    dh = build_deadhead({"A": (42.0, -83.0)})
    assert dh.distance_km[0, 0] == 0 and dh.duration_min[0, 0] == 0


def test_ten_km_at_thirty_kmh_is_twenty_minutes():
    dlat = math.degrees(10.0 / EARTH_RADIUS_KM)
    dh = build_deadhead({"A": (10.0, 20.0), "B": (10.0 + dlat, 20.0)}, speed_kmh=30.0, detour_factor=1.0)
    assert dh.distance_km[0, 1] == pytest.approx(10.0, abs=1e-9)
    assert dh.duration_min[0, 1] == 20


@pytest.mark.parametrize("seed", range(3))
def test_random_layout_matches_pairwise_oracle(seed):
    rng = np.random.default_rng(seed)
    stops = {f"s{k}": (40 + rng.uniform(), -80 + rng.uniform()) for k in range(5)}
    dh = build_deadhead(stops, speed_kmh=25.0, detour_factor=1.3, consumption_rate=1.1)
    for i, a in enumerate(dh.stop_ids):
        for j, b in enumerate(dh.stop_ids):
            km = 0.0 if a == b else 1.3 * oracle_km(stops[a], stops[b])
            assert dh.distance_km[i, j] == pytest.approx(km, rel=1e-9, abs=1e-12)
            assert dh.duration_min[i, j] == math.ceil(round(km / 25.0 * 60.0, 9))
            assert dh.energy_kwh[i, j] == pytest.approx(1.1 * km, rel=1e-9, abs=1e-12)


# -- compatibility, depots, fleet bound -------------------------------------------

def pair_with_gap(gamma):
    trips = [Trip(0, "R", "A", "B", 560, 600, 1.0, 1.2), Trip(1, "R", "C", "A", 620, 660, 1.0, 1.2)]
    km_per_min = 30.0 / 60.0
    from ebusopt.ingest.geometry import StopDeadhead
    ids = ("A", "B", "C")
    km = np.full((3, 3), gamma * km_per_min)
    np.fill_diagonal(km, 0.0)
    dur = np.full((3, 3), gamma, dtype=np.int64)
    np.fill_diagonal(dur, 0)
    dh = node_deadhead(trips, [Depot(0, "A")], StopDeadhead(ids, km, dur, km * 1.2))
    return trips, dh


@pytest.mark.parametrize("gamma, compatible, theta", [(10, True, 10), (20, True, 0), (25, False, 0)])
def test_compatibility_boundary(gamma, compatible, theta):
    trips, dh = pair_with_gap(gamma)
    comp = build_compatibility(trips, dh)
    assert bool(comp[0, 1]) is compatible and not comp[1, 0]
    assert dh.idle_min[0, 1] == theta


def trips_at(stops):
    return [Trip(k, "R", a, b, 600 + 100 * k, 650 + 100 * k, 1.0, 1.2) for k, (a, b) in enumerate(stops)]


def test_select_depots_tie_rule():
    # counts A=10, C=7, B=7
    legs = [("A", "B")] * 7 + [("A", "C")] * 3 + [("C", "C")] * 2
    assert select_depots(trips_at(legs), 2) == ["A", "B"]
    assert select_depots(trips_at(legs), 10) == ["A", "B", "C"]
    with pytest.raises(IngestError):
        select_depots(trips_at(legs), 0)


def test_select_depots_matches_full_sort():
    inst = generate_synthetic(SyntheticSpec(seed=3, n_trips=120, n_terminals=20))
    counts = {}
    for t in inst.trips:
        for s in (t.start_stop, t.end_stop):
            counts[s] = counts.get(s, 0) + 1
    oracle = [s for _, s in sorted((-c, s) for s, c in counts.items())][:6]
    assert select_depots(inst.trips, 6) == oracle


def test_min_fleet_bound():
    overlap = [Trip(k, "R", "A", "B", 600 + k, 700, 1.0, 1.2) for k in range(3)]
    disjoint = [Trip(k, "R", "A", "B", 600 + 100 * k, 650 + 100 * k, 1.0, 1.2) for k in range(3)]
    touching = [Trip(0, "R", "A", "B", 600, 650, 1.0, 1.2), Trip(1, "R", "A", "B", 650, 700, 1.0, 1.2)]
    assert min_fleet_bound(overlap) == 3
    assert min_fleet_bound(disjoint) == 1
    assert min_fleet_bound(touching) == 1


def test_build_instance_rejects_missing_coordinates():
    with pytest.raises(IngestError, match="coordinates"):
        build_instance(trips_at([("A", "B")]), {"A": (42.0, -83.0)})


# -- synthetic ------------------------------------------------------------------

def test_synthetic_is_deterministic(tmp_path):
    a = generate_synthetic(SyntheticSpec(seed=1, n_trips=6))
    b = generate_synthetic(SyntheticSpec(seed=1, n_trips=6))
    assert instances_equal(a, b)
    save_instance(a, tmp_path / "i.json")
    assert instances_equal(load_instance(tmp_path / "i.json"), a)
    assert not instances_equal(a, generate_synthetic(SyntheticSpec(seed=2, n_trips=6)))


def test_single_trip_synthetic_needs_one_bus():
    from ebusopt.ils import concurrent_scheduler
    inst = generate_synthetic(SyntheticSpec(seed=4, n_trips=1))
    assert len(concurrent_scheduler(inst).rotations) == 1


@pytest.mark.parametrize("seed", range(1, 51))
def test_synthetic_passes_roundtrip_precheck(seed):
    params = CostParams()
    inst = generate_synthetic(SyntheticSpec(seed=seed, n_trips=8), params)
    n = inst.n_trips
    e = inst.deadhead.energy_kwh
    for t in inst.trips:
        best = min(e[n + d, t.id] + t.energy_kwh + e[t.id, n + d] for d in range(inst.n_depots))
        assert best <= params.l_max - params.l_min
    assert unserviceable_trips(inst, params) == []


@given(st.integers(0, 10_000))
def test_synthetic_instance_invariants(seed):
    inst = generate_synthetic(SyntheticSpec(seed=seed, n_trips=12))
    assert [t.id for t in inst.trips] == list(range(inst.n_trips))
    alpha = np.array([t.start_time for t in inst.trips])
    beta = np.array([t.end_time for t in inst.trips])
    gamma = inst.deadhead.duration_min[:inst.n_trips, :inst.n_trips]
    want = beta[:, None] + gamma <= alpha[None, :]
    np.fill_diagonal(want, False)
    assert (inst.compat == want).all()
