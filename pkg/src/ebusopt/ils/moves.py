"""Neighborhood scans for trip exchanges, trip shifts and depot exchanges.

Base savings (buses + deadhead, milli-dollars) are computed for a whole
neighborhood at once with numpy; candidates then stream out in rank order
(savings descending, then (bus1, bus2, pos1, pos2) ascending) and callers
check charge feasibility lazily, so the first feasible one is the best.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ..model import Rotation
from .config import EXCHANGE_DEPOTS, EXCHANGE_TRIPS, SHIFT_TRIP
from .core import Layout, Search


@dataclass(frozen=True)
class Candidate:
    savings: int  # base savings only
    key: tuple[int, ...]
    kind: str
    payload: tuple
    changes: tuple[tuple[int, Rotation | None], ...]

    def rank(self) -> tuple:
        return (-self.savings, *self.key)


def apply_changes(rotations: Sequence[Rotation], changes) -> list[Rotation]:
    out = list(rotations)
    for b, r in changes:
        out[b] = r
    return [r for r in out if r is not None]


def candidate_feasible(search: Search, cand: Candidate, stations: frozenset) -> bool:
    return all(r is None or search.rotation_feasible(r, stations) for _, r in cand.changes)


def _ordered(savings: np.ndarray, *keys: np.ndarray) -> np.ndarray:
    return np.lexsort(tuple(reversed(keys)) + (-savings,))


# -- exchange ---------------------------------------------------------------


def exchange_stream(search: Search, rots: Sequence[Rotation], lay: Layout,
                    min_savings: float) -> Iterator[Candidate]:
    n = search.n
    if len(rots) < 2:
        return
    C, NC = search.costs, search.nc
    T = np.arange(n)
    P, S = lay.prev, lay.next
    cur = C[P, T] + C[T, S]
    ins = C[P[:, None], T[None, :]] + C[T[None, :], S[:, None]]
    fit = NC[P[:, None], T[None, :]] & NC[T[None, :], S[:, None]]
    mask = fit & fit.T & (lay.bus[:, None] < lay.bus[None, :])
    gain = cur[:, None] + cur[None, :] - ins - ins.T
    if np.isfinite(min_savings):
        mask &= gain >= min_savings
    xs, ys = np.nonzero(mask)
    if not xs.size:
        return
    g = gain[xs, ys]
    order = _ordered(g, lay.bus[xs], lay.bus[ys], lay.pos[xs], lay.pos[ys])
    for k in order:
        x, y = int(xs[k]), int(ys[k])
        u, v = int(lay.bus[x]), int(lay.bus[y])
        j, i = int(lay.pos[x]), int(lay.pos[y])
        ru, rv = rots[u], rots[v]
        tu = ru.trips[:j] + (y,) + ru.trips[j + 1:]
        tv = rv.trips[:i] + (x,) + rv.trips[i + 1:]
        yield Candidate(int(g[k]), (u, v, j, i), EXCHANGE_TRIPS, (u, j, v, i),
                        ((u, ru.with_trips(tu)), (v, rv.with_trips(tv))))


# -- shift ------------------------------------------------------------------


def _slots(lay: Layout, n_bus: int):
    T = np.arange(lay.n)
    prev = np.concatenate([T, lay.start])
    nxt = np.concatenate([lay.next, lay.first])
    bus = np.concatenate([lay.bus, np.arange(n_bus)])
    at = np.concatenate([lay.pos + 1, np.zeros(n_bus, dtype=np.int64)])
    return prev, nxt, bus, at


def _repairs(search: Search, rots: Sequence[Rotation], v: int, stations: frozenset):
    """Ways to rebalance depots after removing rotation v, cheapest first.

    Removing v (start d0, end d1) leaves one extra end at d0: either one
    rotation ending at d0 now ends at d1, or one starting at d1 starts at d0.
    """
    n, C = search.n, search.costs
    d0, d1 = rots[v].start_depot, rots[v].end_depot
    out = []
    for w, r in enumerate(rots):
        if w == v:
            continue
        if r.end_depot == d0:
            out.append((int(C[r.trips[-1], n + d1] - C[r.trips[-1], n + d0]), w, 1))
        if r.start_depot == d1:
            out.append((int(C[n + d0, r.trips[0]] - C[n + d1, r.trips[0]]), w, 0))
    out.sort()
    return out


def _repaired(r: Rotation, variant: int, d0: int, d1: int) -> Rotation:
    if variant == 1:
        return Rotation(r.bus_id, r.start_depot, r.trips, d1)
    return Rotation(r.bus_id, d0, r.trips, r.end_depot)


def _repair_delta(search: Search, r: Rotation, variant: int, d0: int, d1: int) -> int:
    n, C = search.n, search.costs
    if variant == 1:
        return int(C[r.trips[-1], n + d1] - C[r.trips[-1], n + d0])
    return int(C[n + d0, r.trips[0]] - C[n + d1, r.trips[0]])


def _removed(r: Rotation, k: int) -> Rotation | None:
    trips = r.trips[:k] + r.trips[k + 1:]
    return r.with_trips(trips) if trips else None


def shift_stream(search: Search, rots: Sequence[Rotation], lay: Layout, min_savings: float,
                 stations: frozenset, only_trip: int | None = None) -> Iterator[Candidate]:
    """Shift one trip into another rotation (after one of its trips, or first).

    A rotation left empty is dropped, crediting c_bus; if its depots differ,
    the cheapest feasible depot rebalancing is part of the move.
    """
    n, C, NC = search.n, search.costs, search.nc
    B = len(rots)
    if B < 2:
        return
    T = np.arange(n) if only_trip is None else np.array([only_trip])
    P, S = lay.prev[T], lay.next[T]
    sprev, snext, sbus, sat = _slots(lay, B)
    bus_t = lay.bus[T]
    fit = NC[sprev[None, :], T[:, None]] & NC[T[:, None], snext[None, :]] & (sbus[None, :] != bus_t[:, None])
    single = lay.size[bus_t] == 1
    cur = C[P, T] + C[T, S]
    rem = np.where(single, search.c_bus + cur, cur - C[P, S])
    removable = single | NC[P, S]
    add = C[sprev[None, :], T[:, None]] + C[T[:, None], snext[None, :]] - C[sprev, snext][None, :]
    gain = rem[:, None] - add
    unbalanced = single & (lay.start[bus_t] != lay.end[bus_t])
    mask = fit & (removable & ~unbalanced)[:, None]
    if np.isfinite(min_savings):
        mask &= gain >= min_savings
    rows, cols = np.nonzero(mask)
    g = gain[rows, cols]
    order = _ordered(g, bus_t[rows], sbus[cols], lay.pos[T[rows]], sat[cols])

    def build(x: int, col: int, savings: int, extra=()) -> Candidate:
        v, u = int(lay.bus[x]), int(sbus[col])
        k, j = int(lay.pos[x]), int(sat[col])
        ru = rots[u]
        target = ru.with_trips(ru.trips[:j] + (x,) + ru.trips[j:])
        changes = ((v, _removed(rots[v], k)), (u, target)) + tuple(extra)
        return Candidate(savings, (v, u, k, j), SHIFT_TRIP, (v, k, u, j), changes)

    def vector() -> Iterator[Candidate]:
        for k in order:
            yield build(int(T[rows[k]]), int(cols[k]), int(g[k]))

    special = [int(T[r]) for r in np.nonzero(unbalanced & removable)[0]]
    if not special:
        yield from vector()
        return
    extra = []
    for x in special:
        row = int(np.nonzero(T == x)[0][0])
        v = int(lay.bus[x])
        d0, d1 = rots[v].start_depot, rots[v].end_depot
        options = _repairs(search, rots, v, stations)
        for col in np.nonzero(fit[row])[0]:
            u = int(sbus[col])
            base = build(x, int(col), int(gain[row, col]))
            target = base.changes[1][1]
            best = None
            for delta, w, variant in options:
                if w == u:
                    delta = _repair_delta(search, target, variant, d0, d1)
                    fixed = _repaired(target, variant, d0, d1)
                else:
                    fixed = _repaired(rots[w], variant, d0, d1)
                if best is not None and (delta, w, variant) >= best[0]:
                    continue
                if search.rotation_feasible(fixed, stations):
                    best = ((delta, w, variant), fixed)
            if best is None:
                continue
            (delta, w, _), fixed = best
            s = int(gain[row, col]) - delta
            if s < min_savings:
                continue
            ch = [base.changes[0]] + ([(u, fixed)] if w == u else [base.changes[1], (w, fixed)])
            extra.append(Candidate(s, base.key, SHIFT_TRIP, base.payload, tuple(ch)))
    extra.sort(key=Candidate.rank)
    yield from heapq.merge(vector(), extra, key=Candidate.rank)


# -- depot exchange -----------------------------------------------------------


def depot_stream(search: Search, rots: Sequence[Rotation], lay: Layout,
                 min_savings: float) -> Iterator[Candidate]:
    """Swap start depots (variant 0) or end depots (variant 1) of two rotations."""
    B = len(rots)
    if B < 2 or search.instance.n_depots < 2:
        return
    C = search.costs
    st, en, fi, la = lay.start, lay.end, lay.first, lay.last
    upper = np.triu(np.ones((B, B), dtype=bool), 1)
    g0 = (C[st, fi][:, None] + C[st, fi][None, :] - C[st[None, :], fi[:, None]] - C[st[:, None], fi[None, :]])
    m0 = upper & (st[:, None] != st[None, :])
    g1 = (C[la, en][:, None] + C[la, en][None, :] - C[la[:, None], en[None, :]] - C[la[None, :], en[:, None]])
    m1 = upper & (en[:, None] != en[None, :])
    if np.isfinite(min_savings):
        m0 &= g0 >= min_savings
        m1 &= g1 >= min_savings
    us0, vs0 = np.nonzero(m0)
    us1, vs1 = np.nonzero(m1)
    us = np.concatenate([us0, us1])
    vs = np.concatenate([vs0, vs1])
    var = np.concatenate([np.zeros(us0.size, dtype=np.int64), np.ones(us1.size, dtype=np.int64)])
    g = np.concatenate([g0[us0, vs0], g1[us1, vs1]])
    for k in _ordered(g, us, vs, var):
        u, v, w = int(us[k]), int(vs[k]), int(var[k])
        ru, rv = rots[u], rots[v]
        if w == 0:
            nu = Rotation(ru.bus_id, rv.start_depot, ru.trips, ru.end_depot)
            nv = Rotation(rv.bus_id, ru.start_depot, rv.trips, rv.end_depot)
        else:
            nu = Rotation(ru.bus_id, ru.start_depot, ru.trips, rv.end_depot)
            nv = Rotation(rv.bus_id, rv.start_depot, rv.trips, ru.end_depot)
        yield Candidate(int(g[k]), (u, v, w, 0), EXCHANGE_DEPOTS, (u, v, "start" if w == 0 else "end"),
                        ((u, nu), (v, nv)))
