"""Local search operators against from-scratch neighborhood enumeration."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ebusopt.feasibility import is_rotation_charge_feasible
from ebusopt.ils import (EXCHANGE_DEPOTS, NO_MOVE, IlsConfig, Search, apply_best_improvement, apply_move,
                         close_charging_station, concurrent_scheduler, exchange_depots, exchange_trips,
                         open_charging_stations, optimize_ebus_fleet, optimize_multiple_shifts, optimize_rotations,
                         shift_trip, update_utilization)
from ebusopt.model import CostParams, Rotation, base_cost, to_milli

from conftest import line_instance, toy_instance
from oracles import exchange_neighborhood, random_partition, shift_neighborhood, utilization_walk

ILS_PARAMS = CostParams(l_max=150.0, l_min=20.0)
LINE = {"A": (42.28, -83.74), "B": (42.37, -83.74)}  # ~10 km apart


def ids(inst, *labels):
    """Trip ids after ingest re-sorts trips by start time."""
    by = {t.label: t.id for t in inst.trips}
    return tuple(by[f"t{k}"] for k in labels)


def _valid_partition(inst, rots):
    served = sorted(t for r in rots for t in r.trips)
    return served == list(range(inst.n_trips))


def random_state(seed, n_trips=8, params=ILS_PARAMS):
    """A one-depot toy instance and a random feasible starting plan (or None)."""
    inst = toy_instance(seed, n_trips=n_trips, n_depots=1, n_cand=2, params=params)
    z = frozenset(inst.candidate_stations)
    rots = random_partition(inst, seed)
    if not all(is_rotation_charge_feasible(r, z, params, inst).feasible for r in rots):
        return None
    search = Search(inst, params, IlsConfig())
    return inst, search, search.state(rots, z)


def states(n, n_trips=8, start=0):
    out, seed = [], start
    while len(out) < n:
        got = random_state(seed, n_trips)
        if got is not None:
            out.append((seed, *got))
        seed += 1
    return out


# -- concurrent scheduler ------------------------------------------------------------------

def test_cs_chains_sequential_trips():
    inst = line_instance([("A", "B", 400, 430, 10.0), ("B", "A", 450, 480, 10.0)], LINE)
    cs = concurrent_scheduler(inst)
    assert [r.trips for r in cs.rotations] == [(0, 1)]
    assert cs.open_stations == frozenset()


def test_cs_simultaneous_trips_need_two_buses():
    inst = line_instance([("A", "B", 400, 430, 10.0), ("A", "B", 405, 435, 10.0)], LINE)
    cs = concurrent_scheduler(inst)
    assert len(cs.rotations) == 2


@pytest.mark.parametrize("seed", range(10))
def test_cs_plan_is_valid(seed):
    inst = toy_instance(seed, n_trips=8)
    cs = concurrent_scheduler(inst, CostParams(l_max=100.0, l_min=20.0))
    assert _valid_partition(inst, cs.rotations)
    for r in cs.rotations:
        assert all(inst.compat[a, b] for a, b in zip(r.trips, r.trips[1:]))
        assert is_rotation_charge_feasible(r, cs.open_stations, CostParams(l_max=100.0, l_min=20.0), inst).feasible


# -- exchange ------------------------------------------------------------------------------

def crossed_line():
    """Two buses that each deadhead back across the line; swapping the second trips removes both deadheads."""
    spec = [("A", "B", 400, 430, 10.0), ("A", "B", 600, 630, 10.0),
            ("B", "A", 400, 430, 10.0), ("B", "A", 600, 630, 10.0)]
    inst = line_instance(spec, LINE, n_depots=2, depot_stops=["A", "B"])
    rots = [Rotation(0, 0, ids(inst, 0, 1), 0), Rotation(1, 1, ids(inst, 2, 3), 1)]
    return inst, rots


def test_exchange_removes_deadhead():
    inst, rots = crossed_line()
    params = CostParams()
    search = Search(inst, params)
    state = search.state(rots, frozenset())
    move = exchange_trips(state, search)
    assert move.found
    best = max(s for s, _ in exchange_neighborhood(inst, params, list(state.rotations), frozenset()))
    assert move.savings == best > 0
    after = apply_move(state, move, search)
    assert sorted(r.trips for r in after.rotations) == sorted([ids(inst, 0, 3), ids(inst, 2, 1)])
    assert state.objective_cache - after.objective_cache == move.savings


def test_exchange_fixed_point_has_no_move():
    inst, rots = crossed_line()
    search = Search(inst, CostParams())
    fixed = search.state([Rotation(0, 0, ids(inst, 0, 3), 0), Rotation(1, 1, ids(inst, 2, 1), 1)], frozenset())
    assert not exchange_trips(fixed, search).found
    assert exchange_trips(fixed, search).savings == NO_MOVE


def test_exchange_skips_charge_infeasible_swaps():
    # the uncrossing swap would give bus 0 both 40 kWh trips: 80 kWh against 70 usable
    km = 40.0 / 1.2
    spec = [("A", "B", 400, 430, km), ("A", "B", 600, 630, 5.0 / 1.2),
            ("B", "A", 400, 430, 5.0 / 1.2), ("B", "A", 600, 630, km)]
    for l_max, feasible in ((90.0, False), (200.0, True)):
        params = CostParams(l_max=l_max, l_min=20.0)
        inst = line_instance(spec, LINE, n_depots=2, depot_stops=["A", "B"], params=params)
        rots = [Rotation(0, 0, ids(inst, 0, 1), 0), Rotation(1, 1, ids(inst, 2, 3), 1)]
        assert all(is_rotation_charge_feasible(r, frozenset(), params, inst).feasible for r in rots)
        search = Search(inst, params)
        move = exchange_trips(search.state(rots, frozenset()), search)
        opts = list(exchange_neighborhood(inst, params, rots, frozenset()))
        assert move.found == feasible == bool(opts)


@pytest.mark.parametrize("case", states(15), ids=lambda c: f"seed{c[0]}")
def test_exchange_matches_enumeration(case):
    _, inst, search, state = case
    move = exchange_trips(state, search)
    opts = [s for s, _ in exchange_neighborhood(inst, ILS_PARAMS, list(state.rotations), state.open_stations)
            if s > search.config.improvement_eps]
    if opts:
        assert move.savings == max(opts)
    else:
        assert not move.found or move.savings <= search.config.improvement_eps


# -- shift ---------------------------------------------------------------------------------

def test_shift_absorbs_single_trip_rotation():
    inst = line_instance([("A", "B", 400, 430, 10.0), ("B", "A", 450, 480, 10.0)], LINE)
    params = CostParams()
    search = Search(inst, params)
    state = search.state([Rotation(0, 0, (0,), 0), Rotation(1, 0, (1,), 0)], frozenset())
    move = shift_trip(state, search)
    assert move.found and move.savings >= to_milli(params.c_bus) - to_milli(20 * params.c_km)
    after = apply_move(state, move, search)
    assert [r.trips for r in after.rotations] == [(0, 1)]


def test_shift_without_insertion_point():
    inst = line_instance([("A", "B", 400, 430, 10.0), ("A", "B", 405, 435, 10.0)], LINE)
    search = Search(inst, CostParams())
    state = search.state([Rotation(0, 0, (0,), 0), Rotation(1, 0, (1,), 0)], frozenset())
    assert not shift_trip(state, search).found


@pytest.mark.parametrize("case", states(15, n_trips=10, start=100), ids=lambda c: f"seed{c[0]}")
def test_shift_matches_enumeration(case):
    _, inst, search, state = case
    move = shift_trip(state, search)
    opts = [s for s, _ in shift_neighborhood(inst, ILS_PARAMS, list(state.rotations), state.open_stations)
            if s > search.config.improvement_eps]
    if opts:
        assert move.savings == max(opts)
        after = apply_move(state, move, search)
        assert _valid_partition(inst, after.rotations)
        assert state.objective_cache - after.objective_cache == move.savings
    else:
        assert not move.found or move.savings <= search.config.improvement_eps


# -- depot exchange ------------------------------------------------------------------------

def test_depot_exchange_uncrosses_depots():
    spec = [("A", "A", 400, 430, 5.0), ("B", "B", 400, 430, 5.0)]
    inst = line_instance(spec, LINE, n_depots=2, depot_stops=["A", "B"])
    params = CostParams()
    search = Search(inst, params)
    # each bus starts at the far depot
    a, b = ids(inst, 0, 1)
    state = search.state([Rotation(0, 1, (a,), 0), Rotation(1, 0, (b,), 1)], frozenset())
    move = exchange_depots(state, search)
    after = apply_move(state, move, search)
    assert move.kind == EXCHANGE_DEPOTS and move.savings > 0
    assert {(r.start_depot, r.trips) for r in after.rotations} == {(0, (a,)), (1, (b,))}
    assert move.savings == (base_cost(state.rotations, frozenset(), inst, params)
                            - base_cost(after.rotations, frozenset(), inst, params))


def test_depot_exchange_single_depot():
    inst = line_instance([("A", "B", 400, 430, 10.0), ("A", "B", 405, 435, 10.0)], LINE)
    search = Search(inst, CostParams())
    state = search.state([Rotation(0, 0, (0,), 0), Rotation(1, 0, (1,), 0)], frozenset())
    assert exchange_depots(state, search).savings == NO_MOVE


@given(st.integers(0, 10_000))
def test_depot_exchange_keeps_balance(seed):
    inst = toy_instance(seed, n_trips=6, n_depots=3, params=ILS_PARAMS)
    rng = np.random.default_rng(seed)
    starts = rng.integers(inst.n_depots, size=inst.n_trips)
    ends = rng.permutation(starts)
    rots = [Rotation(b, int(starts[b]), (b,), int(ends[b])) for b in range(inst.n_trips)]
    search = Search(inst, ILS_PARAMS)
    state = search.state(rots, frozenset(inst.candidate_stations))
    move = exchange_depots(state, search)
    if move.found:
        after = apply_move(state, move, search)
        assert move.savings == state.objective_cache - after.objective_cache
        for d in range(inst.n_depots):
            assert sum(r.start_depot == d for r in after.rotations) == sum(r.end_depot == d for r in after.rotations)


# -- descent -------------------------------------------------------------------------------

@pytest.mark.parametrize("case", states(8, start=200), ids=lambda c: f"seed{c[0]}")
def test_optimize_rotations_reaches_local_optimum(case):
    _, inst, search, state = case
    log = []
    out = optimize_rotations(state, search, log)
    objs = [state.objective_cache] + [e[2] for e in log]
    assert all(b <= a for a, b in zip(objs, objs[1:]))
    assert out.objective_cache == base_cost(out.rotations, out.open_stations, inst, ILS_PARAMS)
    assert _valid_partition(inst, out.rotations)
    eps = search.config.improvement_eps
    rots = list(out.rotations)
    assert all(s <= eps for s, _ in shift_neighborhood(inst, ILS_PARAMS, rots, out.open_stations))
    assert all(s <= eps for s, _ in exchange_neighborhood(inst, ILS_PARAMS, rots, out.open_stations))
    again = optimize_rotations(out, search)
    assert again.rotations == out.rotations and again.objective_cache == out.objective_cache


def test_best_improvement_none_at_fixed_point():
    inst = line_instance([("A", "B", 400, 430, 10.0), ("B", "A", 450, 480, 10.0)], LINE)
    search = Search(inst, CostParams())
    state = search.state([Rotation(0, 0, (0, 1), 0)], frozenset())
    same, move = apply_best_improvement(state, search)
    assert same is state and move.savings == NO_MOVE


# -- multi-shift ---------------------------------------------------------------------------

def _three_bus_line():
    # bus 2 runs two short trips that fit into the gaps of buses 0 and 1
    spec = [("A", "B", 400, 430, 10.0), ("B", "A", 600, 630, 10.0),
            ("A", "B", 420, 450, 10.0), ("B", "A", 620, 650, 10.0),
            ("B", "A", 460, 490, 10.0), ("A", "B", 520, 550, 10.0)]
    inst = line_instance(spec, LINE)
    rots = [Rotation(0, 0, ids(inst, 0, 1), 0), Rotation(1, 0, ids(inst, 2, 3), 0),
            Rotation(2, 0, ids(inst, 4, 5), 0)]
    return inst, rots


def test_multi_shift_empties_small_rotation():
    inst, rots = _three_bus_line()
    params = CostParams()
    search = Search(inst, params)
    state = search.state(rots, frozenset())
    log = []
    out = optimize_multiple_shifts(state, search, log)
    assert len(out.rotations) < 3 and _valid_partition(inst, out.rotations)
    assert log and log[0][0] == "MultiShift"
    assert out.objective_cache == base_cost(out.rotations, frozenset(), inst, params)


def test_multi_shift_respects_zeta():
    inst, rots = _three_bus_line()
    search = Search(inst, CostParams(), IlsConfig(zeta=1))
    state = search.state(rots, frozenset())
    assert optimize_multiple_shifts(state, search).rotations == state.rotations


def test_multi_shift_rejects_net_loss():
    inst, rots = _three_bus_line()
    # buses are free, deadhead is not: packing costs more than it saves
    params = CostParams(c_bus=0.0)
    search = Search(inst, params)
    state = search.state(rots, frozenset())
    out = optimize_multiple_shifts(state, search)
    assert out.objective_cache <= state.objective_cache
    if out.rotations != state.rotations:
        assert state.objective_cache - out.objective_cache > search.config.improvement_eps


# -- stations ------------------------------------------------------------------------------

def test_utilization_charge_at_arrival():
    params = CostParams(l_max=60.0, l_min=10.0)
    inst = line_instance([("A", "B", 400, 430, 25.0), ("B", "A", 445, 475, 25.0)], LINE, params=params)
    search = Search(inst, params)
    out = update_utilization(search.state([Rotation(0, 0, (0, 1), 0)], {"B"}), search)
    assert out.open_stations == {"B"} and out.cur_util == {"B": 15}
    assert out.pot_util == {}


def test_utilization_neither_open():
    params = CostParams(l_max=60.0, l_min=10.0)
    spec = [("A", "B", 400, 430, 25.0), ("A", "B", 470, 500, 25.0)]
    inst = line_instance(spec, LINE, params=params)
    search = Search(inst, params)
    out = update_utilization(search.state([Rotation(0, 0, (0, 1), 0)], {"A"}), search)
    # A is open and the layover B->A can use it on arrival at A: charge-and-go at the next start
    theta = int(inst.deadhead.idle_min[0, 1])
    assert out.cur_util == {"A": theta} and out.pot_util == {"B": theta}
    none = update_utilization(search.state([Rotation(0, 0, (0, 1), 0)], frozenset()), search)
    assert none.pot_util == {"A": theta, "B": theta} and none.open_stations == frozenset()


@pytest.mark.parametrize("seed", range(12))
def test_utilization_matches_walk(seed):
    params = CostParams(l_max=100.0, l_min=20.0)
    inst = toy_instance(seed, n_trips=8, n_depots=1, n_cand=3, params=params)
    z = frozenset(sorted(inst.candidate_stations)[: seed % 3])
    rots = random_partition(inst, seed)
    search = Search(inst, params)
    out = update_utilization(search.state(rots, z), search)
    cur, pot = utilization_walk(inst, params, rots, z)
    assert out.open_stations == frozenset(s for s in z if cur[s] > 0)
    assert dict(out.pot_util) == {s: v for s, v in pot.items()}
    assert dict(out.cur_util) == {s: cur[s] for s in out.open_stations}


def _needs_station():
    """Two 40 km trips: one bus can run both only by charging at B in between."""
    params = CostParams(l_max=100.0, l_min=20.0, c_loc=1000.0)
    inst = line_instance([("A", "B", 400, 440, 40.0), ("B", "A", 500, 540, 40.0)], LINE, params=params)
    return inst, params


def test_open_station_removes_bus():
    inst, params = _needs_station()
    search = Search(inst, params)
    state = search.state([Rotation(0, 0, (0,), 0), Rotation(1, 0, (1,), 0)], frozenset())
    log = []
    out = open_charging_stations(state, ["B"], search, log)
    assert out.open_stations == {"B"} and len(out.rotations) == 1
    assert log[-1][0] == "OpenStations"
    assert out.objective_cache == base_cost(out.rotations, {"B"}, inst, params)


def test_open_unused_candidate_is_rolled_back():
    inst, params = _needs_station()
    search = Search(inst, params)
    two = [Rotation(0, 0, (0,), 0), Rotation(1, 0, (1,), 0)]
    # A is the depot side only: the layover at B is where the energy is needed
    state = search.state(two, frozenset())
    params_hi = CostParams(l_max=100.0, l_min=20.0, c_loc=10 * 381_500.0)
    s_hi = Search(inst, params_hi)
    st_hi = s_hi.state(two, frozenset())
    out = open_charging_stations(st_hi, ["B"], s_hi)
    assert out.rotations == st_hi.rotations and out.open_stations == st_hi.open_stations
    assert out.objective_cache == st_hi.objective_cache
    assert state.open_stations == frozenset()


def test_close_unused_station():
    inst = line_instance([("A", "B", 400, 430, 5.0), ("B", "A", 450, 480, 5.0)], LINE)
    params = CostParams()
    search = Search(inst, params)
    state = search.state([Rotation(0, 0, (0, 1), 0)], {"B"})
    log = []
    out = close_charging_station(state, "B", search, log)
    assert out.open_stations == frozenset() and out.rotations == state.rotations
    assert state.objective_cache - out.objective_cache == to_milli(params.c_loc)


def test_close_station_that_strands_is_rejected_when_bus_costs_more():
    inst, params = _needs_station()
    search = Search(inst, params)
    state = search.state([Rotation(0, 0, (0, 1), 0)], {"B"})
    out = close_charging_station(state, "B", search)
    assert out.open_stations == {"B"} and out.rotations == state.rotations


def test_close_station_split_accepted_when_station_costs_more():
    params = CostParams(l_max=100.0, l_min=20.0, c_loc=500_000.0)
    inst = line_instance([("A", "B", 400, 440, 40.0), ("B", "A", 500, 540, 40.0)], LINE, params=params)
    search = Search(inst, params)
    state = search.state([Rotation(0, 0, (0, 1), 0)], {"B"})
    out = close_charging_station(state, "B", search)
    assert out.open_stations == frozenset() and len(out.rotations) == 2
    assert _valid_partition(inst, out.rotations)


def test_close_station_not_open():
    inst, params = _needs_station()
    search = Search(inst, params)
    with pytest.raises(ValueError, match="not open"):
        close_charging_station(search.state([Rotation(0, 0, (0,), 0), Rotation(1, 0, (1,), 0)], frozenset()),
                               "B", search)


# -- whole pipeline ------------------------------------------------------------------------


@pytest.mark.parametrize("mode", ["sequential", "joint"])
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_fleet_never_worse_than_cs(seed, mode):
    params = CostParams(l_max=100.0, l_min=20.0, c_loc=20_000.0)
    inst = toy_instance(seed, n_trips=8, params=params)
    res = optimize_ebus_fleet(inst, params, IlsConfig(mode=mode))
    cs_total = base_cost(res.initial.rotations, res.initial.open_stations, inst, params)
    if res.kept_initial:
        assert res.state.rotations == res.initial.rotations
    assert res.total <= cs_total + (res.initial_schedule.total if res.initial_schedule else 10**18)
    assert _valid_partition(inst, res.state.rotations)
    objs = [e["objective"] for e in res.log]
    assert all(b <= a for a, b in zip(objs, objs[1:]))


@pytest.mark.parametrize("mode", ["sequential", "joint"])
def test_fleet_parallel_matches_serial(mode):
    params = CostParams(l_max=100.0, l_min=20.0, c_loc=20_000.0)
    inst = toy_instance(7, n_trips=10, params=params)
    a = optimize_ebus_fleet(inst, params, IlsConfig(mode=mode))
    b = optimize_ebus_fleet(inst, params, IlsConfig(mode=mode, parallel=True, threads=4))
    assert a.state.rotations == b.state.rotations and a.state.open_stations == b.state.open_stations
    assert a.total == b.total and a.log == b.log
