"""Charge-scheduling models over fixed rotations.

split   per-minute transfers, Dual layovers collapsed to one end (LP)
uniform one constant rate per opportunity (LP), capacity by cliques or minutes
cee     per-minute transfers with Dual split decisions (MILP)
clp     split CAG plus optional station binaries (MILP)

Objectives are in dollars; schedules report integer milli-dollars recomputed
from the decoded transfers.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..model import CostParams, PricingSchedule
from ..solver import LE, EQ, Limits, LinearModel, SolveResult, Status, solve
from ..solver.bnb import mip_solve
from .cliques import enumerate_overlap_cliques
from .opportunities import CAG, CEE, DUAL, GAC, BusCharging, ChargingOpportunity, charge_free, collapse

_TOL = 1e-6


class CspError(RuntimeError):
    """The rotations cannot be served, or the solver failed."""


@dataclass
class ChargeSchedule:
    strategy: str
    transfers: dict[tuple[int, str, int], float] = field(default_factory=dict)
    station_caps: dict[str, float] = field(default_factory=dict)
    levels: dict[tuple[int, int], float] = field(default_factory=dict)
    elec_cost: int = 0
    cap_cost: int = 0
    dual_splits: dict[tuple[int, int], tuple[int, int]] = field(default_factory=dict)
    objective: float = 0.0
    status: str = Status.OPTIMAL.value
    stations: frozenset = frozenset()
    capacity_rows: int = 0

    @property
    def total(self) -> int:
        return self.elec_cost + self.cap_cost

    def energy_by_bus(self) -> dict[int, float]:
        out: dict[int, float] = defaultdict(float)
        for (b, _, _), v in self.transfers.items():
            out[b] += v
        return dict(out)


def charge_rate(params: CostParams) -> float:
    return min(params.charge_rate_max, params.transfer_max)


def _elec_scale(params: CostParams) -> float:
    return params.lifetime_scale


def _needing(buses: Sequence[BusCharging], params: CostParams) -> list[BusCharging]:
    return [b for b in buses if not charge_free(b, params.l_max, params.l_min)]


def _price_breaks(pricing: PricingSchedule, a: int, b: int) -> list[int]:
    p = pricing.prices(a, b)
    return (np.nonzero(np.diff(p))[0] + 1 + a).tolist()


class _Builder:
    """Shared level/transfer/capacity bookkeeping for the per-bus chains."""

    def __init__(self, name: str, params: CostParams, pricing: PricingSchedule):
        self.m = LinearModel(name)
        self.params = params
        self.pricing = pricing
        self.rate = charge_rate(params)
        self.scale = _elec_scale(params)
        # station -> key -> [(var, coef)] ; key is a minute or a (first, last) segment
        self.cap_terms: dict[str, dict] = defaultdict(lambda: defaultdict(list))
        # var -> (bus, station, first, last) for decoding (spread evenly on [first, last])
        self.spread: dict[int, tuple[int, str, int, int]] = {}
        self.duals: list[tuple[int, list[tuple[int, int]]]] = []  # (bus, [(minute, p var)])
        self.dual_start: list[tuple[int, list[tuple[int, int]]]] = []

    def infeasible(self, bus: BusCharging) -> CspError:
        return CspError(f"bus {bus.bus_id} cannot be served by the given stations")

    # transfers -----------------------------------------------------------
    def minute_vars(self, bus: int, station: str, window: tuple[int, int], ub: float | None = None) -> list[int]:
        a, b = window
        prices = self.pricing.prices(a, b) * self.scale
        out = []
        for t in range(a, b + 1):
            v = self.m.add_var(f"w_{bus}_{station}_{t}", 0.0, self.rate if ub is None else ub,
                               float(prices[t - a]))
            self.cap_terms[station][t].append((v, 60.0))
            self.spread[v] = (bus, station, t, t)
            out.append(v)
        return out

    def segment_vars(self, bus: int, station: str, window: tuple[int, int], cuts: list[int]) -> list[int]:
        a, b = window
        bounds = [a] + [c for c in cuts if a < c <= b] + [b + 1]
        out = []
        for lo, hi in zip(bounds, bounds[1:]):
            if hi <= lo:
                continue
            length = hi - lo
            price = self.pricing.price(lo) * self.scale
            v = self.m.add_var(f"w_{bus}_{station}_{lo}_{hi - 1}", 0.0, self.rate * length, price)
            self.cap_terms[station][(lo, hi - 1)].append((v, 60.0 / length))
            self.spread[v] = (bus, station, lo, hi - 1)
            out.append(v)
        return out

    # levels ----------------------------------------------------------------
    def chain(self, bus: BusCharging, transfer_vars) -> None:
        """Level rows for one bus; transfer_vars(opp) -> (end vars, start vars)."""
        p = self.params
        opps = bus.opportunities
        nxt = [o.e_before for o in opps[1:]] + [bus.e_tail]
        prev = None  # None means the constant l_max
        if not opps:
            if p.l_max - bus.e_tail < p.l_min - 1e-9:
                raise self.infeasible(bus)
            return
        if p.l_max - opps[0].e_before < p.l_min - 1e-9:
            raise self.infeasible(bus)
        for opp, e_next in zip(opps, nxt):
            first, second = transfer_vars(opp)
            if opp.kind == DUAL:
                lo_mid = p.l_min + opp.e_within
                if lo_mid > p.l_max:
                    raise self.infeasible(bus)
                mid = self.m.add_var(f"m_{bus.bus_id}_{opp.k}", lo_mid, p.l_max)
                self._link(mid, prev, first, -opp.e_before, f"lv_{bus.bus_id}_{opp.k}a")
                lo = p.l_min + e_next
                if lo > p.l_max:
                    raise self.infeasible(bus)
                lvl = self.m.add_var(f"l_{bus.bus_id}_{opp.k}", lo, p.l_max)
                self._link(lvl, mid, second, -opp.e_within, f"lv_{bus.bus_id}_{opp.k}b")
            else:
                lo = p.l_min + e_next
                if lo > p.l_max:
                    raise self.infeasible(bus)
                lvl = self.m.add_var(f"l_{bus.bus_id}_{opp.k}", lo, p.l_max)
                self._link(lvl, prev, first, -opp.e_before, f"lv_{bus.bus_id}_{opp.k}")
            prev = lvl

    def _link(self, new: int, prev: int | None, transfers: list[int], rhs: float, name: str) -> None:
        # new - prev - sum(w) = rhs   (prev = l_max when None)
        idx = [new] + ([prev] if prev is not None else []) + list(transfers)
        val = [1.0] + ([-1.0] if prev is not None else []) + [-1.0] * len(transfers)
        if prev is None:
            rhs += self.params.l_max
        self.m.add_row(idx, val, EQ, rhs, name)

    # capacity ----------------------------------------------------------------
    def capacity(self) -> dict[str, int]:
        qvars = {}
        for s in sorted(self.cap_terms):
            q = self.m.add_var(f"q_{s}", 0.0, math.inf, self.params.c_cap)
            qvars[s] = q
            for key in sorted(self.cap_terms[s], key=lambda k: k if isinstance(k, tuple) else (k, k)):
                terms = self.cap_terms[s][key]
                self.m.add_row([v for v, _ in terms] + [q], [c for _, c in terms] + [-1.0], LE, 0.0,
                               f"cap_{s}_{key if not isinstance(key, tuple) else key[0]}")
        return qvars


# ---------------------------------------------------------------------------
# decoding


def _decode(builder: _Builder, buses: Sequence[BusCharging], x: np.ndarray | None,
            strategy: str, objective: float, status: Status, stations: Iterable[str] = ()) -> ChargeSchedule:
    params = builder.params
    rate = builder.rate
    transfers: dict[tuple[int, str, int], float] = {}
    if x is not None:
        for v, (b, s, lo, hi) in builder.spread.items():
            val = float(x[v])
            if val <= 1e-9:
                continue
            per = min(val / (hi - lo + 1), rate)
            for t in range(lo, hi + 1):
                transfers[(b, s, t)] = transfers.get((b, s, t), 0.0) + per
    splits = {}
    if x is not None:
        for b, pairs in builder.duals:
            for t, v in pairs:
                splits[(b, t)] = (int(round(x[v])), splits.get((b, t), (0, 0))[1])
        for b, pairs in builder.dual_start:
            for t, v in pairs:
                splits[(b, t)] = (splits.get((b, t), (0, 0))[0], int(round(x[v])))
    return finalize_schedule(buses, transfers, params, builder.pricing, strategy, objective, status,
                             splits, stations)


def finalize_schedule(buses: Sequence[BusCharging], transfers: dict, params: CostParams,
                      pricing: PricingSchedule, strategy: str, objective: float = math.nan,
                      status: Status = Status.OPTIMAL, splits: dict | None = None,
                      stations: Iterable[str] = ()) -> ChargeSchedule:
    """Recompute levels, capacities and costs from per-minute transfers."""
    levels: dict[tuple[int, int], float] = {}
    for bus in buses:
        l = params.l_max
        levels[(bus.bus_id, 0)] = l
        for opp in bus.opportunities:
            got = [sum(transfers.get((bus.bus_id, s, t), 0.0) for t in range(a, b + 1))
                   for s, (a, b) in zip(opp.stations, opp.windows)]
            l = l - opp.e_before + got[0]
            if opp.kind == DUAL:
                l = l - opp.e_within + got[1]
            levels[(bus.bus_id, opp.k)] = l
    load: dict[tuple[str, int], float] = defaultdict(float)
    elec = 0.0
    for (b, s, t), v in transfers.items():
        load[(s, t)] += v
        elec += pricing.price(t) * v
    caps: dict[str, float] = {}
    for (s, t), v in load.items():
        caps[s] = max(caps.get(s, 0.0), 60.0 * v)
    elec_milli = int(round(elec * _elec_scale(params) * 1000.0))
    cap_milli = int(round(sum(caps.values()) * params.c_cap * 1000.0))
    used = frozenset(stations) if stations else frozenset(caps)
    return ChargeSchedule(strategy, dict(sorted(transfers.items())), dict(sorted(caps.items())), levels,
                          elec_milli, cap_milli, dict(sorted((splits or {}).items())), objective,
                          status.value, used)


def _run(model: LinearModel, backend: str, limits: Limits | None = None,
         incumbent: float | None = None) -> SolveResult:
    if backend == "native" and any(model.integer):
        return mip_solve(model, limits, incumbent=incumbent)
    return solve(model, backend, limits)


def _check(res: SolveResult, what: str) -> None:
    if res.status == Status.INFEASIBLE:
        raise CspError(f"{what}: rotations cannot be served by the given stations")
    if res.status == Status.UNBOUNDED:
        raise CspError(f"{what}: unbounded model")
    if res.x is None and res.status != Status.OPTIMAL:
        raise CspError(f"{what}: solver stopped without a solution ({res.status.value})")


# ---------------------------------------------------------------------------
# split priority


def _collapsed(buses: Sequence[BusCharging], strategy: str) -> list[BusCharging]:
    if any(o.kind == DUAL for b in buses for o in b.opportunities):
        return collapse(buses, strategy)
    return list(buses)


def _segment_cuts(buses: Sequence[BusCharging], pricing: PricingSchedule) -> dict[str, list[int]]:
    cuts: dict[str, set] = defaultdict(set)
    for bus in buses:
        for opp in bus.opportunities:
            for s, (a, b) in zip(opp.stations, opp.windows):
                cuts[s].add(a)
                cuts[s].add(b + 1)
                cuts[s].update(_price_breaks(pricing, a, b))
    return {s: sorted(c) for s, c in cuts.items()}


def build_split_model(buses: Sequence[BusCharging], params: CostParams,
                      pricing: PricingSchedule | None = None, aggregate: bool = True,
                      name: str = "split") -> _Builder:
    """Split-priority LP over Single opportunities (K_b^2 must already be empty).

    With aggregate=True, minutes are merged into segments on which the price and
    the set of open windows at the station are constant. Minutes inside such a
    segment are interchangeable, so this is an exact reduction.
    """
    pricing = pricing or params.pricing
    bld = _Builder(name, params, pricing)
    cuts = _segment_cuts(buses, pricing) if aggregate else {}
    for bus in buses:
        def tv(opp: ChargingOpportunity, bus=bus):
            if opp.kind == DUAL:
                raise ValueError("split model needs collapsed opportunities")
            if aggregate:
                return bld.segment_vars(bus.bus_id, opp.station, opp.windows[0], cuts[opp.station]), []
            return bld.minute_vars(bus.bus_id, opp.station, opp.windows[0]), []
        bld.chain(bus, tv)
    return bld


def solve_split_priority(buses: Sequence[BusCharging], params: CostParams,
                         pricing: PricingSchedule | None = None, strategy: str = CAG,
                         backend: str = "native", aggregate: bool = True) -> ChargeSchedule:
    if strategy not in (CAG, GAC):
        raise ValueError("strategy must be CAG or GAC")
    buses = _needing(_collapsed(buses, strategy), params)
    pricing = pricing or params.pricing
    if not buses:
        return ChargeSchedule(strategy)
    bld = build_split_model(buses, params, pricing, aggregate)
    bld.capacity()
    res = _run(bld.m, backend)
    _check(res, f"split-{strategy}")
    return _decode(bld, buses, res.x, strategy, res.objective, res.status)


# ---------------------------------------------------------------------------
# uniform priority


def _window_overlap_max(intervals: Sequence[tuple[int, int]]) -> int:
    events = sorted([(a, 1) for a, _ in intervals] + [(b + 1, -1) for _, b in intervals],
                    key=lambda e: (e[0], e[1]))
    cur = best = 0
    for _, d in events:
        cur += d
        best = max(best, cur)
    return best


def build_uniform_model(buses: Sequence[BusCharging], params: CostParams,
                        pricing: PricingSchedule | None = None, capacity: str = "clique",
                        background: dict[str, dict[int, float]] | None = None,
                        name: str = "uniform") -> tuple[LinearModel, dict[int, ChargingOpportunity], int]:
    """Uniform-priority LP. Returns (model, var -> opportunity, number of capacity rows).

    background optionally adds fixed per-minute kWh loads at stations (used to
    price a few buses against a frozen remainder of the fleet).
    """
    pricing = pricing or params.pricing
    background = {st: d for st, d in (background or {}).items() if d}
    if background and capacity == "clique":
        capacity = "segment"  # clique rows are not exact once minutes carry different loads
    bld = _Builder(name, params, pricing)
    scale = bld.scale
    by_station: dict[str, list[tuple[int, ChargingOpportunity]]] = defaultdict(list)
    owner: dict[int, ChargingOpportunity] = {}
    for bus in buses:
        def tv(opp: ChargingOpportunity, bus=bus):
            if opp.kind == DUAL:
                raise ValueError("uniform model needs collapsed opportunities")
            a, b = opp.windows[0]
            delta = b - a + 1
            mean_price = float(pricing.prices(a, b).sum()) / delta
            v = bld.m.add_var(f"w_{bus.bus_id}_{opp.k}", 0.0, bld.rate * delta, scale * mean_price)
            by_station[opp.station].append((v, opp))
            owner[v] = opp
            return [v], []
        bld.chain(bus, tv)
    rows = 0
    for s in sorted(set(by_station) | set(background)):
        items = by_station.get(s, [])
        q = bld.m.add_var(f"q_{s}", 0.0, math.inf, params.c_cap)
        bg = background.get(s, {})
        if capacity == "clique":
            groups = enumerate_overlap_cliques([o.windows[0] for _, o in items])
            for g in groups:
                idx = [items[k][0] for k in g] + [q]
                val = [60.0 / items[k][1].length for k in g] + [-1.0]
                bld.m.add_row(idx, val, LE, 0.0, f"clq_{s}_{rows}")
                rows += 1
        elif capacity in ("timestep", "segment"):
            cover: dict[int, list[int]] = defaultdict(list)
            for k, (_, o) in enumerate(items):
                a, b = o.windows[0]
                for t in range(a, b + 1):
                    cover[t].append(k)
            if capacity == "segment":
                # minutes with the same covering windows differ only in load; keep the peak one
                peak: dict[tuple, int] = {}
                for t in sorted(cover):
                    g = tuple(cover[t])
                    if g not in peak or bg.get(t, 0.0) > bg.get(peak[g], 0.0):
                        peak[g] = t
                minutes = sorted(peak.values())
            else:
                minutes = sorted(cover)
            for t in minutes:
                g = cover[t]
                idx = [items[k][0] for k in g] + [q]
                val = [60.0 / items[k][1].length for k in g] + [-1.0]
                bld.m.add_row(idx, val, LE, -60.0 * bg.get(t, 0.0), f"cap_{s}_{t}")
                rows += 1
        else:
            raise ValueError(f"unknown capacity formulation {capacity!r}")
        if bg:
            # background minutes outside every window still bound q from below
            bld.m.lb[q] = 60.0 * max(bg.values())
    return bld.m, owner, rows


def solve_uniform_priority(buses: Sequence[BusCharging], params: CostParams,
                           pricing: PricingSchedule | None = None, strategy: str = CAG,
                           capacity: str = "clique", backend: str = "native") -> ChargeSchedule:
    buses = _needing(_collapsed(buses, strategy), params)
    pricing = pricing or params.pricing
    if not buses:
        return ChargeSchedule(f"uniform-{strategy}")
    model, owner, rows = build_uniform_model(buses, params, pricing, capacity)
    res = _run(model, backend)
    _check(res, "uniform")
    transfers: dict[tuple[int, str, int], float] = {}
    for v, opp in owner.items():
        val = float(res.x[v])
        if val <= 1e-9:
            continue
        a, b = opp.windows[0]
        per = min(val / (b - a + 1), charge_rate(params))
        for t in range(a, b + 1):
            transfers[(opp.bus_id, opp.station, t)] = per
    sched = finalize_schedule(buses, transfers, params, pricing, f"uniform-{strategy}", res.objective,
                              res.status)
    sched.capacity_rows = rows
    return sched


def uniform_objective(buses: Sequence[BusCharging], params: CostParams,
                      pricing: PricingSchedule | None = None, capacity: str = "clique",
                      background: dict[str, dict[int, float]] | None = None,
                      backend: str = "native") -> float | None:
    """Optimal uniform-CAG objective in dollars, or None when infeasible."""
    buses = _needing(_collapsed(buses, CAG), params)
    if not buses:
        return params.c_cap * sum(60.0 * max(bg.values()) for bg in (background or {}).values() if bg)
    try:
        model, _, _ = build_uniform_model(buses, params, pricing, capacity, background)
    except CspError:
        return None
    res = _run(model, backend)
    if res.status != Status.OPTIMAL:
        return None
    return float(res.objective)


# ---------------------------------------------------------------------------
# charge at either end


def build_cee_model(buses: Sequence[BusCharging], params: CostParams,
                    pricing: PricingSchedule | None = None) -> _Builder:
    pricing = pricing or params.pricing
    bld = _Builder("cee", params, pricing)
    m = bld.m
    for bus in buses:
        def tv(opp: ChargingOpportunity, bus=bus):
            b = bus.bus_id
            if opp.kind != DUAL:
                return bld.minute_vars(b, opp.station, opp.windows[0]), []
            (ea, eb), (sa, sb) = opp.windows
            w_end = bld.minute_vars(b, opp.stations[0], (ea, eb))
            w_start = bld.minute_vars(b, opp.stations[1], (sa, sb))
            pd = [m.add_binary(f"pd_{b}_{t}") for t in range(ea, eb + 1)]
            pa = [m.add_binary(f"pa_{b}_{t}") for t in range(sa, sb + 1)]
            for w, p in zip(w_end, pd):
                m.add_row([w, p], [1.0, -bld.rate], LE, 0.0)
            for w, p in zip(w_start, pa):
                m.add_row([w, p], [1.0, -bld.rate], LE, 0.0)
            for k in range(len(pd) - 1):
                m.add_row([pd[k + 1], pd[k]], [1.0, -1.0], LE, 0.0)
            for k in range(len(pa) - 1):
                m.add_row([pa[k], pa[k + 1]], [1.0, -1.0], LE, 0.0)
            tau = opp.deadhead_min
            for k, t in enumerate(range(ea, eb + 1)):
                u = t + tau
                if sa <= u <= sb:
                    m.add_row([pa[u - sa], pd[k]], [1.0, 1.0], LE, 1.0)
            bld.duals.append((b, list(zip(range(ea, eb + 1), pd))))
            bld.dual_start.append((b, list(zip(range(sa, sb + 1), pa))))
            return w_end, w_start
        bld.chain(bus, tv)
    return bld


def solve_cee_milp(buses: Sequence[BusCharging], params: CostParams,
                   pricing: PricingSchedule | None = None, backend: str = "native",
                   limits: Limits | None = None, warm_start: bool = True) -> ChargeSchedule:
    """CEE MILP. The split-CAG schedule is a feasible point and seeds the search.

    If the search cannot beat it (or stops at a limit first), that schedule is
    returned with status reflecting the proof.
    """
    pricing = pricing or params.pricing
    buses = _needing(buses, params)
    if not buses:
        return ChargeSchedule(CEE)
    limits = limits or Limits(max_nodes=20_000, time_limit=120.0)
    fallback = solve_split_priority(buses, params, pricing, CAG, backend)
    if not any(o.kind == DUAL for b in buses for o in b.opportunities):
        fallback.strategy = CEE
        return fallback
    bld = build_cee_model(buses, params, pricing)
    bld.capacity()
    incumbent = fallback.objective if warm_start and backend == "native" else None
    if incumbent is not None:
        incumbent += 1e-7 * (1.0 + abs(incumbent))  # let an equal-cost CEE point through
    res = _run(bld.m, backend, limits, incumbent)
    if res.x is None:
        if res.status == Status.INFEASIBLE and incumbent is None:
            raise CspError("cee: rotations cannot be served by the given stations")
        fallback.strategy = CEE
        fallback.status = res.status.value
        return fallback
    sched = _decode(bld, buses, res.x, CEE, res.objective, res.status)
    if sched.total > fallback.total:
        fallback.strategy = CEE
        return fallback
    return sched


# ---------------------------------------------------------------------------
# charging location + charge scheduling


def solve_clp_csp(buses: Sequence[BusCharging], params: CostParams,
                  pricing: PricingSchedule | None = None, backend: str = "native",
                  limits: Limits | None = None) -> tuple[frozenset, ChargeSchedule]:
    """Split-CAG with one optional-use binary per station appearing in the opportunities.

    The opportunities must have been extracted over the candidate set. Returns
    the stations with z = 1 and the schedule under those opportunities.
    """
    pricing = pricing or params.pricing
    buses = _needing(_collapsed(buses, CAG), params)
    if not buses:
        return frozenset(), ChargeSchedule(CAG)
    bld = build_split_model(buses, params, pricing, aggregate=True, name="clp-csp")
    qvars = bld.capacity()
    windows: dict[str, list[tuple[int, int]]] = defaultdict(list)
    for bus in buses:
        for opp in bus.opportunities:
            windows[opp.station].append(opp.windows[0])
    zvars = {}
    for s in sorted(qvars):
        z = bld.m.add_binary(f"z_{s}", params.c_loc)
        big_m = 60.0 * bld.rate * _window_overlap_max(windows[s])
        bld.m.add_row([qvars[s], z], [1.0, -big_m], LE, 0.0, f"open_{s}")
        zvars[s] = z
    res = _run(bld.m, backend, limits or Limits(max_nodes=20_000, time_limit=120.0))
    _check(res, "clp-csp")
    chosen = frozenset(s for s, z in zvars.items() if res.x[z] > 0.5)
    sched = _decode(bld, buses, res.x, CAG, res.objective, res.status, chosen)
    return chosen, sched


# ---------------------------------------------------------------------------
# validation


def validate_schedule(buses: Sequence[BusCharging], sched: ChargeSchedule, params: CostParams,
                      tol: float = 1e-6) -> list[str]:
    """Bounds, windows, levels, energy balance, capacity and Dual sequencing."""
    issues = []
    rate = charge_rate(params)
    allowed: dict[tuple[int, str, int], ChargingOpportunity] = {}
    for bus in buses:
        for opp in bus.opportunities:
            for s, (a, b) in zip(opp.stations, opp.windows):
                for t in range(a, b + 1):
                    allowed[(bus.bus_id, s, t)] = opp
    for key, v in sched.transfers.items():
        if v < -tol or v > rate + tol:
            issues.append(f"transfer {key}: {v} outside [0, {rate}]")
        if key not in allowed and v > tol:
            issues.append(f"transfer {key}: outside every charging window")
    load: dict[tuple[str, int], float] = defaultdict(float)
    for (b, s, t), v in sched.transfers.items():
        load[(s, t)] += v
    for (s, t), v in load.items():
        if 60.0 * v > sched.station_caps.get(s, 0.0) + tol:
            issues.append(f"capacity {s} minute {t}: {60.0 * v} kW > {sched.station_caps.get(s, 0.0)}")
    got = sched.energy_by_bus()
    for bus in buses:
        b = bus.bus_id
        l = params.l_max
        opps = bus.opportunities
        nxt = [o.e_before for o in opps[1:]] + [bus.e_tail]
        if opps and l - opps[0].e_before < params.l_min - tol:
            issues.append(f"bus {b}: below l_min before opportunity 1")
        for opp, e_next in zip(opps, nxt):
            amounts = [sum(sched.transfers.get((b, s, t), 0.0) for t in range(a, w + 1))
                       for s, (a, w) in zip(opp.stations, opp.windows)]
            l = l - opp.e_before + amounts[0]
            if opp.kind == DUAL:
                if l > params.l_max + tol:
                    issues.append(f"bus {b} opportunity {opp.k}: above l_max after end charging")
                if l - opp.e_within < params.l_min - tol:
                    issues.append(f"bus {b} opportunity {opp.k}: below l_min after deadhead")
                l = l - opp.e_within + amounts[1]
                (ea, eb), (sa, sb) = opp.windows
                ends = [t for t in range(ea, eb + 1) if sched.transfers.get((b, opp.stations[0], t), 0.0) > tol]
                starts = [t for t in range(sa, sb + 1) if sched.transfers.get((b, opp.stations[1], t), 0.0) > tol]
                if ends and starts and min(starts) <= max(ends) + opp.deadhead_min:
                    issues.append(f"bus {b} opportunity {opp.k}: start-stop charging overlaps the deadhead")
            if l > params.l_max + tol:
                issues.append(f"bus {b} opportunity {opp.k}: level {l} above l_max")
            if l - e_next < params.l_min - tol:
                issues.append(f"bus {b} opportunity {opp.k}: level {l - e_next} below l_min")
            recorded = sched.levels.get((b, opp.k))
            if recorded is not None and abs(recorded - l) > tol:
                issues.append(f"bus {b} opportunity {opp.k}: recorded level {recorded} != {l}")
        if not opps and params.l_max - bus.e_tail < params.l_min - tol:
            issues.append(f"bus {b}: below l_min with no charging")
        final = l - bus.e_tail
        balance = params.l_max - final + got.get(b, 0.0) - bus.e_total
        if abs(balance) > tol:
            # l_max - l_final + transfers must equal the energy driven
            issues.append(f"bus {b}: energy balance off by {balance}")
    return issues
