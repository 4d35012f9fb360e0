"""Independent reference solvers and random model generators for the tests."""
from __future__ import annotations

import itertools
import math

import numpy as np

from ebusopt.solver import EQ, GE, LE, LinearModel


def random_lp(seed: int, n: int = 10, m: int = 8) -> LinearModel:
    """Feasible, bounded LP with mixed row senses over x >= 0.

    Row 0 has strictly positive coefficients and sense <=, which bounds the
    polytope; every other row is built around a known feasible point.
    """
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(0, 2, n) * (rng.uniform(size=n) < 0.7)
    lp = LinearModel(f"lp{seed}")
    for j in range(n):
        lp.add_var(f"x{j}", 0.0, math.inf, float(np.round(rng.normal(), 3)))
    a0 = np.round(rng.uniform(0.5, 2.0, n), 3)
    lp.add_row(range(n), a0, LE, float(np.round(a0 @ x0 + rng.uniform(1, 5), 3)))
    for _ in range(m - 1):
        a = np.round(rng.normal(size=n), 3) * (rng.uniform(size=n) < 0.6)
        act = a @ x0
        sense = rng.choice([LE, LE, GE, EQ])
        if sense == LE:
            rhs = act + rng.uniform(0, 2)
        elif sense == GE:
            rhs = act - rng.uniform(0, 2)
        else:
            rhs = act
        lp.add_row(np.nonzero(a)[0], a[a != 0], str(sense), float(rhs))
    return lp


def vertex_enumeration(lp: LinearModel) -> float:
    """min over basic feasible solutions of {A x + S s = b, x, s >= 0}.

    Only for models with lb = 0, ub = inf on every variable.
    """
    assert all(v == 0 for v in lp.lb) and all(math.isinf(v) for v in lp.ub)
    A = lp.matrix().toarray()
    m, n = A.shape
    cols = [A[:, j] for j in range(n)]
    cost = list(lp.obj)
    for r, sense in enumerate(lp.senses):
        if sense != EQ:
            e = np.zeros(m)
            e[r] = 1.0 if sense == LE else -1.0
            cols.append(e)
            cost.append(0.0)
    full = np.column_stack(cols)
    cost = np.array(cost)
    b = np.array(lp.rhs)
    combos = np.array(list(itertools.combinations(range(full.shape[1]), m)))
    mats = full[:, combos].transpose(1, 0, 2)  # (k, m, m)
    ok = np.abs(np.linalg.det(mats)) > 1e-9
    best = math.inf
    sols = np.linalg.solve(mats[ok], np.broadcast_to(b, (ok.sum(), m))[..., None])[..., 0]
    feas = (sols >= -1e-9).all(axis=1)
    for basis, xb in zip(combos[ok][feas], sols[feas]):
        best = min(best, float(cost[basis] @ xb))
    return best + lp.offset


def random_binary_milp(seed: int, n: int | None = None) -> LinearModel:
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(4, 11))
    lp = LinearModel(f"bin{seed}")
    for j in range(n):
        lp.add_binary(f"y{j}", float(rng.integers(-10, 11)))
    for _ in range(int(rng.integers(1, 5))):
        a = rng.integers(-5, 9, n).astype(float)
        sense = str(rng.choice([LE, LE, GE, EQ]))
        pick = rng.integers(0, 2, n)
        act = float(a @ pick)
        rhs = act + float(rng.integers(0, 6)) if sense == LE else act - float(rng.integers(0, 6)) \
            if sense == GE else act
        if rng.uniform() < 0.15:
            rhs += 0.5 if sense == EQ else 0.0  # occasionally infeasible
        lp.add_row(range(n), a, sense, rhs)
    return lp


def exhaustive_binary(lp: LinearModel) -> float | None:
    """Minimum over all 0/1 assignments, None if no assignment is feasible."""
    n = lp.num_vars
    pts = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
    A = lp.matrix().toarray()
    act = pts @ A.T
    b = np.array(lp.rhs)
    ok = np.ones(len(pts), dtype=bool)
    for r, sense in enumerate(lp.senses):
        if sense == LE:
            ok &= act[:, r] <= b[r] + 1e-9
        elif sense == GE:
            ok &= act[:, r] >= b[r] - 1e-9
        else:
            ok &= np.abs(act[:, r] - b[r]) <= 1e-9
    if not ok.any():
        return None
    return float((pts[ok] @ np.array(lp.obj)).min()) + lp.offset


def highs_resolve(path) -> tuple[str, float]:
    """Read an LP file with highspy and solve it."""
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    status = h.readModel(str(path))
    assert status == highspy.HighsStatus.kOk, status
    h.run()
    status = h.modelStatusToString(h.getModelStatus())
    return status, float(h.getInfo().objective_function_value)


# -- local search neighborhoods, re-evaluated from scratch ---------------------------------

def _chain_ok(inst, trips) -> bool:
    return all(inst.compat[a, b] for a, b in zip(trips, trips[1:]))


def _feasible(inst, params, rots, z) -> bool:
    from ebusopt.feasibility import is_rotation_charge_feasible
    return all(is_rotation_charge_feasible(r, z, params, inst).feasible for r in rots)


def shift_neighborhood(inst, params, rots, z):
    """Every single-trip relocation between rotations on a one-depot instance.

    Yields (savings, new rotations). Savings come from a full base-cost
    recomputation.
    """
    from ebusopt.model import Rotation, base_cost
    assert inst.n_depots == 1
    before = base_cost(rots, z, inst, params)
    for v, rv in enumerate(rots):
        for k, x in enumerate(rv.trips):
            rest = rv.trips[:k] + rv.trips[k + 1:]
            if rest and not _chain_ok(inst, rest):
                continue
            for u, ru in enumerate(rots):
                if u == v:
                    continue
                for j in range(len(ru.trips) + 1):
                    tr = ru.trips[:j] + (x,) + ru.trips[j:]
                    if not _chain_ok(inst, tr):
                        continue
                    new = list(rots)
                    new[u] = Rotation(ru.bus_id, ru.start_depot, tr, ru.end_depot)
                    new[v] = Rotation(rv.bus_id, rv.start_depot, rest, rv.end_depot) if rest else None
                    new = [r for r in new if r is not None]
                    if not _feasible(inst, params, [new[w] for w in range(len(new))
                                                    if new[w].bus_id in (ru.bus_id, rv.bus_id)], z):
                        continue
                    yield before - base_cost(new, z, inst, params), new


def exchange_neighborhood(inst, params, rots, z):
    """Every swap of two trips between rotations, each taking the other's position."""
    from ebusopt.model import Rotation, base_cost
    before = base_cost(rots, z, inst, params)
    for u, ru in enumerate(rots):
        for v in range(u + 1, len(rots)):
            rv = rots[v]
            for j, x in enumerate(ru.trips):
                for i, y in enumerate(rv.trips):
                    tu = ru.trips[:j] + (y,) + ru.trips[j + 1:]
                    tv = rv.trips[:i] + (x,) + rv.trips[i + 1:]
                    if not (_chain_ok(inst, tu) and _chain_ok(inst, tv)):
                        continue
                    nu = Rotation(ru.bus_id, ru.start_depot, tu, ru.end_depot)
                    nv = Rotation(rv.bus_id, rv.start_depot, tv, rv.end_depot)
                    if not _feasible(inst, params, [nu, nv], z):
                        continue
                    new = list(rots)
                    new[u], new[v] = nu, nv
                    yield before - base_cost(new, z, inst, params), new


def utilization_walk(inst, params, rots, z):
    """sigma_cur / sigma_pot by walking each layover of each bus that needs charging."""
    from ebusopt.feasibility import requires_charging
    cur = {s: 0 for s in z}
    pot = {}
    for r in rots:
        if not requires_charging(r, params, inst):
            continue
        for i, k in zip(r.trips, r.trips[1:]):
            theta = int(inst.deadhead.idle_min[i, k])
            a, b = inst.trips[i].end_stop, inst.trips[k].start_stop
            if a in z:  # charge and go at the arrival stop
                cur[a] += theta
            elif b in z:  # go and charge at the next start stop
                cur[b] += theta
                pot[a] = pot.get(a, 0) + theta
            else:
                pot[a] = pot.get(a, 0) + theta
                pot[b] = pot.get(b, 0) + theta
    return cur, pot


def random_partition(inst, seed):
    """A random valid assignment of trips to compatible chains (one depot)."""
    import numpy as np
    from ebusopt.model import Rotation
    rng = np.random.default_rng(seed)
    chains = []
    for t in sorted(range(inst.n_trips), key=lambda t: (inst.trips[t].start_time, t)):
        options = [c for c in chains if inst.compat[c[-1], t]]
        if options and rng.uniform() < 0.7:
            options[int(rng.integers(len(options)))].append(t)
        else:
            chains.append([t])
    return [Rotation(b, 0, tuple(c), 0) for b, c in enumerate(chains)]
