import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import toy_instance
from ebusopt.model import (CostParams, DeadheadMatrix, Depot, Instance, ModelError, PricingSchedule, Rotation,
                           SolutionState, Trip, base_cost, check_depot_balance, check_partition, to_dollars,
                           to_milli, total_cost)


def manual_instance(km_out=5.0, km_in=5.0):
    trip = Trip(0, "R", "A", "B", 600, 660, 20.0, 24.0)
    km = np.array([[0.0, km_in], [km_out, 0.0]])
    dh = DeadheadMatrix(np.zeros((2, 2), dtype=np.int64), km, km * 1.2, np.zeros((2, 2), dtype=np.int64))
    return Instance((trip,), (Depot(0, "D"),), frozenset({"A", "B"}), dh, np.zeros((1, 1), dtype=bool))


def test_empty_state_costs_nothing():
    inst = manual_instance()
    with pytest.raises(ModelError):
        total_cost(SolutionState((), frozenset()), None, CostParams(), inst)  # trip 0 unserved
    assert base_cost([], [], inst, CostParams()) == 0


def test_one_bus_one_station_ten_km():
    inst = manual_instance()
    state = SolutionState((Rotation(0, 0, (0,), 0),), frozenset({"A"}))
    assert total_cost(state, None, CostParams(), inst) == to_milli(381_500 + 218_000 + 21_000)


def test_schedule_cost_is_added():
    inst = manual_instance()
    state = SolutionState((Rotation(0, 0, (0,), 0),), frozenset())
    assert total_cost(state, 1234, CostParams(), inst) == to_milli(381_500 + 21_000) + 1234


def test_lifetime_scale_multiplies_deadhead():
    inst = manual_instance()
    state = SolutionState((Rotation(0, 0, (0,), 0),), frozenset())
    p = CostParams(lifetime_scale=12 * 365)
    assert total_cost(state, None, p, inst) == to_milli(381_500 + 21_000 * 12 * 365)


@pytest.mark.parametrize("seed", range(5))
def test_total_cost_matches_arc_walk(seed):
    inst = toy_instance(seed)
    params = CostParams()
    n = inst.n_trips
    km = inst.deadhead.distance_km
    rots = [Rotation(b, b % inst.n_depots, (t,), b % inst.n_depots) for b, t in enumerate(range(n))]
    walk = 0.0
    for r in rots:
        nodes = [n + r.start_depot, *r.trips, n + r.end_depot]
        walk += sum(km[a, b] for a, b in zip(nodes, nodes[1:]))
    want = to_milli(len(rots) * params.c_bus) + to_milli(walk * params.c_km)
    got = total_cost(SolutionState(tuple(rots), frozenset()), None, params, inst)
    assert abs(got - want) <= len(rots) * 2  # per-arc milli rounding


@given(st.sets(st.sampled_from(["A", "B", "C"])), st.sampled_from(["A", "B", "C"]))
def test_adding_a_station_costs_exactly_c_loc(z, extra):
    inst = toy_instance(1, n_cand=3)
    rots = tuple(Rotation(t, 0, (t,), 0) for t in range(inst.n_trips))
    params = CostParams()
    a = total_cost(SolutionState(rots, frozenset(z)), None, params, inst)
    b = total_cost(SolutionState(rots, frozenset(z | {extra})), None, params, inst)
    assert b - a == (0 if extra in z else to_milli(params.c_loc))


def test_partition_and_balance_checks():
    check_partition([Rotation(0, 0, (0, 1), 1), Rotation(1, 1, (2,), 0)], 3)
    with pytest.raises(ModelError, match="trip 1 served 2 times"):
        check_partition([Rotation(0, 0, (0, 1), 0), Rotation(1, 0, (1, 2), 0)], 3)
    with pytest.raises(ModelError, match="trip 2 served 0 times"):
        check_partition([Rotation(0, 0, (0, 1), 0)], 3)
    check_depot_balance([Rotation(0, 0, (0,), 1), Rotation(1, 1, (1,), 0)])
    with pytest.raises(ModelError, match="depot balance"):
        check_depot_balance([Rotation(0, 0, (0,), 1)])


def test_value_object_invariants():
    with pytest.raises(ModelError):
        Trip(0, "R", "A", "B", 600, 600, 1.0, 1.2)
    with pytest.raises(ModelError):
        Trip(0, "R", "A", "B", 600, 610, -1.0, 1.2)
    with pytest.raises(ModelError):
        CostParams(l_min=300.0, l_max=300.0)
    with pytest.raises(ModelError):
        CostParams(charge_rate_max=0.0)
    with pytest.raises(ModelError):
        Rotation(0, 0, (), 0)


def test_pricing_tiles_the_day():
    p = PricingSchedule.default()
    assert p.price(0) == 555.0 and p.price(540) == 444.0 and p.price(1000) == 1355.0
    assert p.price(1440 + 540) == 444.0  # past midnight wraps onto the same table
    with pytest.raises(ModelError):
        PricingSchedule(((0, 600, 1.0), (700, 1440, 1.0)))
    with pytest.raises(ModelError):
        PricingSchedule(((0, 800, 1.0), (700, 1440, 1.0)))
    with pytest.raises(ModelError):
        PricingSchedule(((0, 1440, -1.0),))


def test_milli_round_trip():
    assert to_milli(381_500.0) == 381_500_000
    assert to_dollars(to_milli(2.5055)) == pytest.approx(2.506)
