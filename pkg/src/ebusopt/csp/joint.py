"""Joint location, bus-to-trip assignment and charge scheduling MILP for toy instances.

Also provides the exhaustive enumeration used as its oracle: every partition of
the trips into compatible chains, every balanced depot assignment and every
station subset, each priced with the CEE residual.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..model import CostParams, Instance, Rotation, arc_costs_milli, base_cost, to_milli
from ..solver import EQ, GE, LE, Limits, LinearModel, Status
from .models import CspError, charge_rate, solve_cee_milp
from .opportunities import CEE, extract_opportunities

MAX_TRIPS, MAX_DEPOTS = 8, 3


class SizeGuardError(ValueError):
    pass


@dataclass
class JointModel:
    model: LinearModel
    x: dict[tuple[int, int, int], int]  # (from node, to node, bus) -> var
    z: dict[str, int]
    n_buses: int


def _windows(instance: Instance):
    """T^end_{i,j} and T^start_{i,j} for compatible trip pairs, plus the per-trip unions."""
    trips, dh = instance.trips, instance.deadhead
    t_end, t_start = {}, {}
    nxt: dict[int, tuple[int, int]] = {}
    prv: dict[int, tuple[int, int]] = {}
    for i, j in zip(*np.nonzero(instance.compat)):
        i, j = int(i), int(j)
        theta = int(dh.idle_min[i, j])
        if theta <= 0:
            continue
        beta, alpha, gamma = trips[i].end_time, trips[j].start_time, int(dh.duration_min[i, j])
        t_end[(i, j)] = (beta, beta + theta - 1)
        t_start[(i, j)] = (beta + gamma, alpha - 1)
        a, b = nxt.get(i, (beta, beta - 1))
        nxt[i] = (beta, max(b, beta + theta - 1))
        a, b = prv.get(j, (alpha, alpha - 1))
        prv[j] = (min(a, beta + gamma), alpha - 1)
    return t_end, t_start, nxt, prv


def build_joint_milp(instance: Instance, params: CostParams, stations: Iterable[str] | None = None,
                     n_buses: int | None = None, symmetry_breaking: bool = True) -> JointModel:
    """The full joint model on a toy instance.

    stations restricts S^cand (default: the instance's candidate set). Bus b may
    only be used if bus b-1 is, which removes relabelled copies of a solution.
    """
    n, m_dep = instance.n_trips, instance.n_depots
    if n > MAX_TRIPS or m_dep > MAX_DEPOTS:
        raise SizeGuardError(f"joint MILP limited to {MAX_TRIPS} trips and {MAX_DEPOTS} depots")
    cand = sorted(instance.candidate_stations if stations is None else stations)
    nb = n if n_buses is None else n_buses
    trips = instance.trips
    e_dh = instance.deadhead.energy_kwh
    cost_milli = arc_costs_milli(instance, params)
    rate = charge_rate(params)
    l_max, l_min = params.l_max, params.l_min
    big = l_max + max((t.energy_kwh for t in trips), default=0.0) + float(e_dh.max(initial=0.0))
    pricing = params.pricing
    t_end, t_start, nxt, prv = _windows(instance)

    mdl = LinearModel("joint")
    depots = [n + d for d in range(m_dep)]
    arcs = [(int(i), int(j)) for i, j in zip(*np.nonzero(instance.compat))]
    arcs += [(d, i) for d in depots for i in range(n)] + [(i, d) for i in range(n) for d in depots]
    x = {}
    for b in range(nb):
        for i, j in arcs:
            c = cost_milli[i, j] / 1000.0 + (params.c_bus if i >= n else 0.0)
            x[(i, j, b)] = mdl.add_binary(f"x_{i}_{j}_{b}", c)
    z = {s: mdl.add_binary(f"z_{s}", params.c_loc) for s in cand}
    out_arcs, in_arcs = defaultdict(list), defaultdict(list)
    for i, j in arcs:
        out_arcs[i].append(j)
        in_arcs[j].append(i)

    # routing
    for i in range(n):
        mdl.add_row([x[(i, j, b)] for b in range(nb) for j in out_arcs[i]], [1.0] * (nb * len(out_arcs[i])),
                    EQ, 1.0, f"serve_{i}")
        for b in range(nb):
            idx = [x[(i, j, b)] for j in out_arcs[i]] + [x[(k, i, b)] for k in in_arcs[i]]
            val = [1.0] * len(out_arcs[i]) + [-1.0] * len(in_arcs[i])
            mdl.add_row(idx, val, EQ, 0.0, f"flow_{i}_{b}")
    for d in depots:
        idx = [x[(d, j, b)] for b in range(nb) for j in out_arcs[d]]
        idx += [x[(k, d, b)] for b in range(nb) for k in in_arcs[d]]
        val = [1.0] * (nb * len(out_arcs[d])) + [-1.0] * (nb * len(in_arcs[d]))
        mdl.add_row(idx, val, EQ, 0.0, f"depot_{d}")
    for b in range(nb):
        used = [x[(d, j, b)] for d in depots for j in out_arcs[d]]
        mdl.add_row(used, [1.0] * len(used), LE, 1.0, f"one_start_{b}")
        if symmetry_breaking and b:
            prev = [x[(d, j, b - 1)] for d in depots for j in out_arcs[d]]
            mdl.add_row(used + prev, [1.0] * len(used) + [-1.0] * len(prev), LE, 0.0, f"order_{b}")

    # charging-time binaries, per trip and minute, and their station link
    ps, pe = {}, {}
    for i, (a, b_) in prv.items():
        s = trips[i].start_stop
        for t in range(a, b_ + 1):
            ps[(i, t)] = mdl.add_binary(f"ps_{i}_{t}")
            if s in z:
                mdl.add_row([ps[(i, t)], z[s]], [1.0, -1.0], LE, 0.0)
            else:
                mdl.ub[ps[(i, t)]] = 0.0
        for t in range(a, b_):
            mdl.add_row([ps[(i, t)], ps[(i, t + 1)]], [1.0, -1.0], LE, 0.0)
    for i, (a, b_) in nxt.items():
        s = trips[i].end_stop
        for t in range(a, b_ + 1):
            pe[(i, t)] = mdl.add_binary(f"pe_{i}_{t}")
            if s in z:
                mdl.add_row([pe[(i, t)], z[s]], [1.0, -1.0], LE, 0.0)
            else:
                mdl.ub[pe[(i, t)]] = 0.0
        for t in range(a, b_):
            mdl.add_row([pe[(i, t + 1)], pe[(i, t)]], [1.0, -1.0], LE, 0.0)
    for (i, j), (a, b_) in t_end.items():
        gamma = int(instance.deadhead.duration_min[i, j])
        for t in range(a, b_ + 1):
            on_arc = [x[(i, j, b)] for b in range(nb)]
            mdl.add_row([ps[(j, t + gamma)], pe[(i, t)]] + on_arc, [1.0, 1.0] + [1.0] * nb, LE, 2.0)

    # transfers
    scale = params.lifetime_scale
    we, ws = {}, {}
    cap_terms: dict[str, dict[int, list[int]]] = defaultdict(lambda: defaultdict(list))
    for b in range(nb):
        for i, (a, b_) in nxt.items():
            for t in range(a, b_ + 1):
                v = mdl.add_var(f"we_{b}_{i}_{t}", 0.0, rate, scale * pricing.price(t))
                we[(b, i, t)] = v
                mdl.add_row([v, pe[(i, t)]], [1.0, -rate], LE, 0.0)
                arcs_t = [x[(i, j, b)] for (ii, j), (lo, hi) in t_end.items() if ii == i and lo <= t <= hi]
                mdl.add_row([v] + arcs_t, [1.0] + [-rate] * len(arcs_t), LE, 0.0)
                cap_terms[trips[i].end_stop][t].append(v)
        for j, (a, b_) in prv.items():
            for t in range(a, b_ + 1):
                v = mdl.add_var(f"ws_{b}_{j}_{t}", 0.0, rate, scale * pricing.price(t))
                ws[(b, j, t)] = v
                mdl.add_row([v, ps[(j, t)]], [1.0, -rate], LE, 0.0)
                arcs_t = [x[(i, jj, b)] for (i, jj), (lo, hi) in t_start.items() if jj == j and lo <= t <= hi]
                mdl.add_row([v] + arcs_t, [1.0] + [-rate] * len(arcs_t), LE, 0.0)
                cap_terms[trips[j].start_stop][t].append(v)

    # levels: ls = at the start stop (after start charging), le = at the end stop
    ls, le = {}, {}
    for b in range(nb):
        for i in range(n):
            ls[(i, b)] = mdl.add_var(f"ls_{i}_{b}", 0.0, l_max)
            le[(i, b)] = mdl.add_var(f"le_{i}_{b}", 0.0, l_max)
        for d in depots:
            ls[(d, b)] = mdl.add_var(f"ls_{d}_{b}", 0.0, l_max)
            le[(d, b)] = mdl.add_var(f"le_{d}_{b}", 0.0, l_max)
    for b in range(nb):
        for i in range(n):
            into = [x[(k, i, b)] for k in in_arcs[i]]
            outof = [x[(i, j, b)] for j in out_arcs[i]]
            e_i = trips[i].energy_kwh
            mdl.add_row([ls[(i, b)]] + into, [1.0] + [-l_max] * len(into), LE, 0.0)
            mdl.add_row([le[(i, b)]] + outof, [1.0] + [-l_max] * len(outof), LE, 0.0)
            mdl.add_row([ls[(i, b)]] + into, [1.0] + [-(e_i + l_min)] * len(into), GE, 0.0)
            mdl.add_row([le[(i, b)]] + outof, [1.0] + [-(float(e_dh[i, j]) + l_min) for j in out_arcs[i]],
                        GE, 0.0)
            for j in out_arcs[i]:
                charge = []
                if (i, j) in t_end:
                    lo, hi = t_end[(i, j)]
                    charge = [we[(b, i, t)] for t in range(lo, hi + 1)]
                xv = x[(i, j, b)]
                base_idx = [le[(i, b)], ls[(i, b)]] + charge + [xv]
                neg = [1.0, -1.0] + [-1.0] * len(charge)
                mdl.add_row(base_idx, neg + [big], LE, big - e_i)
                mdl.add_row(base_idx, neg + [-big], GE, -big - e_i)
        for d in depots:
            outof = [x[(d, j, b)] for j in out_arcs[d]]
            into = [x[(k, d, b)] for k in in_arcs[d]]
            mdl.add_row([le[(d, b)]] + outof, [1.0] + [-l_max] * len(outof), EQ, 0.0)
            mdl.add_row([ls[(d, b)]] + into, [1.0] + [-l_min] * len(into), GE, 0.0)
        for i, j in arcs:
            charge = []
            if (i, j) in t_start:
                lo, hi = t_start[(i, j)]
                charge = [ws[(b, j, t)] for t in range(lo, hi + 1)]
            xv = x[(i, j, b)]
            e = float(e_dh[i, j])
            idx = [ls[(j, b)], le[(i, b)]] + charge + [xv]
            neg = [1.0, -1.0] + [-1.0] * len(charge)
            mdl.add_row(idx, neg + [e - big], GE, -big)
            mdl.add_row(idx, neg + [e + big], LE, big)

    # capacity
    for s in sorted(cap_terms):
        if s not in z:
            continue
        q = mdl.add_var(f"q_{s}", 0.0, math.inf, params.c_cap)
        mdl.add_row([q, z[s]], [1.0, -60.0 * rate * nb], LE, 0.0, f"qopen_{s}")
        for t in sorted(cap_terms[s]):
            vs = cap_terms[s][t]
            mdl.add_row(vs + [q], [60.0] * len(vs) + [-1.0], LE, 0.0, f"cap_{s}_{t}")
    return JointModel(mdl, x, z, nb)


def decode_joint(jm: JointModel, instance: Instance, xval: np.ndarray) -> tuple[list[Rotation], frozenset]:
    n = instance.n_trips
    succ: dict[int, dict[int, int]] = defaultdict(dict)
    for (i, j, b), v in jm.x.items():
        if xval[v] > 0.5:
            succ[b][i] = j
    rotations = []
    for b in sorted(succ):
        start = next(i for i in succ[b] if i >= n)
        path, cur = [], succ[b][start]
        while cur < n:
            path.append(cur)
            cur = succ[b][cur]
        rotations.append(Rotation(len(rotations), start - n, tuple(path), cur - n))
    stations = frozenset(s for s, v in jm.z.items() if xval[v] > 0.5)
    return rotations, stations


# ---------------------------------------------------------------------------
# exhaustive oracle


def _chains(instance: Instance) -> list[list[tuple[int, ...]]]:
    """All partitions of the trips into time-ordered compatible chains."""
    n = instance.n_trips
    order = sorted(range(n), key=lambda t: (instance.trips[t].start_time, t))
    out = []

    def rec(k: int, blocks: list[list[int]]):
        if k == n:
            out.append([tuple(b) for b in blocks])
            return
        t = order[k]
        for blk in blocks:
            if instance.compat[blk[-1], t]:
                blk.append(t)
                rec(k + 1, blocks)
                blk.pop()
        blocks.append([t])
        rec(k + 1, blocks)
        blocks.pop()

    rec(0, [])
    return out


def _depot_assignments(n_rot: int, m: int):
    for starts in itertools.product(range(m), repeat=n_rot):
        need = Counter(starts)
        for ends in itertools.product(range(m), repeat=n_rot):
            if Counter(ends) == need:
                yield starts, ends


@dataclass
class BruteForceResult:
    cost: int
    rotations: list[Rotation]
    stations: frozenset
    evaluated: int


def brute_force_joint(instance: Instance, params: CostParams, stations: Iterable[str] | None = None,
                      backend: str = "native") -> BruteForceResult:
    """Minimum of base cost + CEE residual over all plans; costs in milli-dollars."""
    if instance.n_trips > MAX_TRIPS:
        raise SizeGuardError("brute force limited to toy instances")
    cand = sorted(instance.candidate_stations if stations is None else stations)
    subsets = [frozenset(c) for r in range(len(cand) + 1) for c in itertools.combinations(cand, r)]
    costs = arc_costs_milli(instance, params)
    plans = []
    for blocks in _chains(instance):
        for starts, ends in _depot_assignments(len(blocks), instance.n_depots):
            rots = [Rotation(b, s, blk, e) for b, (blk, s, e) in enumerate(zip(blocks, starts, ends))]
            for z in subsets:
                plans.append((base_cost(rots, z, instance, params, costs), len(plans), rots, z))
    plans.sort(key=lambda p: (p[0], p[1]))
    best = None
    evaluated = 0
    for base, _, rots, z in plans:
        if best is not None and base >= best.cost:
            break
        evaluated += 1
        buses = extract_opportunities(rots, z, instance, CEE)
        try:
            sched = solve_cee_milp(buses, params, backend=backend, limits=Limits(max_nodes=100_000))
        except CspError:
            continue
        total = base + sched.total
        if best is None or total < best.cost:
            best = BruteForceResult(total, rots, z, 0)
    if best is None:
        raise CspError("no feasible plan")
    best.evaluated = evaluated
    return best
