"""Rotation optimization: best-improvement descent and multi-trip shifts."""
from __future__ import annotations

import itertools
from typing import Callable, Iterator, Sequence

from ..model import Rotation
from .config import EXCHANGE_DEPOTS, MULTI_SHIFT, NO_MOVE, Move
from .core import Layout, Search, renumber
from .moves import (Candidate, apply_changes, candidate_feasible, depot_stream, exchange_stream,
                    shift_stream)

Stream = Callable[[float], Iterator[Candidate]]


class Choice:
    """A feasible candidate with its predicted savings (base plus CSP surrogate)."""

    __slots__ = ("cand", "predicted")

    def __init__(self, cand: Candidate, predicted: int):
        self.cand = cand
        self.predicted = predicted

    def rank(self) -> tuple:
        return (-self.predicted, *self.cand.key)

    def move(self, realized: int | None = None, rotations=None) -> Move:
        return Move(self.cand.kind, self.cand.payload,
                    self.predicted if realized is None else realized, rotations)


class Context:
    """One (V, Z) snapshot with the data every scan in a round shares."""

    def __init__(self, search: Search, rotations: Sequence[Rotation], stations: frozenset,
                 objective: int | None = None):
        self.search = search
        self.rots = renumber(rotations)
        self.stations = frozenset(stations)
        self.lay = Layout(self.rots, search.n)
        self.f = search.objective(self.rots, self.stations) if objective is None else objective
        self._sched = None

    def schedule(self) -> tuple:
        """(serial, split schedule) of this snapshot."""
        if self._sched is None:
            self._sched = self.search.csp.keyed_schedule(self.rots, self.stations)
        return self._sched


def _best(ctx: Context, stream: Stream) -> Choice | None:
    """Best feasible candidate of one neighborhood.

    Sequential: the first feasible candidate with savings above eps. Joint: the
    top hybrid_k feasible candidates by base savings are re-ranked with the
    uniform-CAG delta of the touched buses.
    """
    s = ctx.search
    eps = s.config.improvement_eps
    if not s.joint:
        for cand in stream(eps + 1):
            if candidate_feasible(s, cand, ctx.stations):
                return Choice(cand, cand.savings)
        return None
    k = s.config.hybrid_k
    shortlist = []
    for cand in stream(float("-inf")):
        if candidate_feasible(s, cand, ctx.stations):
            shortlist.append(cand)
            if k is not None and len(shortlist) >= k:
                break
    if not shortlist:
        return None
    key, sched = ctx.schedule()
    if sched is None:
        return None
    deltas = s.map(lambda c: s.csp.move_delta(ctx.rots, ctx.stations, c.changes, sched, key), shortlist)
    choices = [Choice(c, c.savings - d) for c, d in zip(shortlist, deltas) if d is not None]
    return min(choices, key=Choice.rank) if choices else None


def exchange_choice(ctx: Context) -> Choice | None:
    return _best(ctx, lambda m: exchange_stream(ctx.search, ctx.rots, ctx.lay, m))


def shift_choice(ctx: Context, only_trip: int | None = None) -> Choice | None:
    return _best(ctx, lambda m: shift_stream(ctx.search, ctx.rots, ctx.lay, m, ctx.stations, only_trip))


def depot_choice(ctx: Context) -> Choice | None:
    return _best(ctx, lambda m: depot_stream(ctx.search, ctx.rots, ctx.lay, m))


def _realize(ctx: Context, choice: Choice) -> tuple[list[Rotation], int, int]:
    rots = renumber(apply_changes(ctx.rots, choice.cand.changes))
    s = ctx.search
    if s.joint:
        f = s.objective(rots, ctx.stations)
    else:
        f = ctx.f - choice.predicted
    return rots, f, ctx.f - f


def apply_best_improvement(ctx: Context) -> tuple[list[Rotation], int, Move] | None:
    """One descent step: the better of the best exchange and best shift; depot
    exchanges only when neither improves. None when no step improves f by
    more than eps."""
    eps = ctx.search.config.improvement_eps
    ex, sh = exchange_choice(ctx), shift_choice(ctx)
    ex_s = ex.predicted if ex else NO_MOVE
    sh_s = sh.predicted if sh else NO_MOVE
    if ex_s <= eps and sh_s <= eps:
        options = [depot_choice(ctx)]
    elif ex_s > sh_s:
        options = [ex, sh]
    else:
        options = [sh, ex]
    for choice in options:
        if choice is None or choice.predicted <= eps:
            continue
        rots, f, realized = _realize(ctx, choice)
        if realized > eps:
            return rots, f, choice.move(realized, tuple(rots))
    return None


def optimize_rotations(search: Search, rotations: Sequence[Rotation], stations: frozenset,
                       objective: int | None = None, log: list | None = None,
                       multi_shift: bool = True) -> tuple[list[Rotation], int]:
    """Descend with apply_best_improvement until no step beats eps, then one
    multi-shift pass. Entries (kind, savings, objective) go to log."""
    ctx = Context(search, rotations, stations, objective)
    for _ in range(search.config.max_iterations):
        step = apply_best_improvement(ctx)
        if step is None:
            break
        rots, f, move = step
        if log is not None:
            log.append((move.kind, move.savings, f))
        ctx = Context(search, rots, stations, f)
    rots, f = ctx.rots, ctx.f
    if multi_shift:
        rots, f = optimize_multiple_shifts(search, rots, stations, f, log)
    return rots, f


def shift_multiple_trips(search: Search, ctx: Context, b: int) -> tuple[list[Rotation], int] | None:
    """Greedily relocate every trip of rotation b elsewhere, best shift first.

    Individual shifts may lose money. Returns None if some trip fits nowhere.
    """
    trips = ctx.rots[b].trips
    cur = ctx
    for x in trips:
        choice = _any_shift(cur, x)
        if choice is None:
            return None
        rots = renumber(apply_changes(cur.rots, choice.cand.changes))
        f = cur.f - choice.predicted if not search.joint else None
        cur = Context(search, rots, ctx.stations, f)
    return cur.rots, cur.f


def _any_shift(ctx: Context, x: int) -> Choice | None:
    s = ctx.search
    stream = lambda m: shift_stream(s, ctx.rots, ctx.lay, m, ctx.stations, x)
    if not s.joint:
        for cand in stream(float("-inf")):
            if candidate_feasible(s, cand, ctx.stations):
                return Choice(cand, cand.savings)
        return None
    return _best(ctx, stream)


def optimize_multiple_shifts(search: Search, rotations: Sequence[Rotation], stations: frozenset,
                             objective: int | None = None, log: list | None = None
                             ) -> tuple[list[Rotation], int]:
    """Repeatedly empty the small rotation (at most zeta trips) whose greedy
    relocation saves the most; stop when no package beats eps."""
    ctx = Context(search, rotations, stations, objective)
    eps = search.config.improvement_eps
    for _ in range(search.config.max_iterations):
        best = None
        for b, r in enumerate(ctx.rots):
            if len(r.trips) > search.config.zeta:
                continue
            out = shift_multiple_trips(search, ctx, b)
            if out is None:
                continue
            savings = ctx.f - out[1]
            if best is None or savings > best[0]:
                best = (savings, out)
        if best is None or best[0] <= eps:
            break
        savings, (rots, f) = best
        if log is not None:
            log.append((MULTI_SHIFT, savings, f))
        ctx = Context(search, rots, stations, f)
    return ctx.rots, ctx.f
