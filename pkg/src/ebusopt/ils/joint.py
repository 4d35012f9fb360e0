"""CSP surrogates used inside the Joint-mode search.

f(V, Z) adds the split-CAG cost. Trip and depot moves are ranked with the
uniform-CAG LP solved only for the touched buses, priced against the frozen
per-minute station loads of every other bus in the current split schedule.
"""
from __future__ import annotations

from collections import OrderedDict, defaultdict
from typing import Sequence

from ..csp import CAG, ChargeSchedule, CspError, extract_opportunities, solve_clp_csp, solve_split_priority
from ..csp.models import uniform_objective
from ..model import Rotation, to_milli

_CACHE = 64


def _key(rotations: Sequence[Rotation], stations: frozenset) -> tuple:
    return tuple((r.start_depot, r.trips, r.end_depot) for r in rotations), stations


class JointCsp:
    def __init__(self, search):
        self.search = search
        self._split: OrderedDict = OrderedDict()
        self._uniform: dict = {}
        self._serial = 0

    def _remember(self, key, value) -> None:
        self._split[key] = value
        self._split.move_to_end(key)
        while len(self._split) > _CACHE:
            self._split.popitem(last=False)

    def split_schedule(self, rotations: Sequence[Rotation], stations: frozenset) -> ChargeSchedule | None:
        return self.keyed_schedule(rotations, stations)[1]

    def keyed_schedule(self, rotations: Sequence[Rotation], stations: frozenset
                       ) -> tuple[int, ChargeSchedule | None]:
        """(serial, schedule); the serial identifies the schedule in surrogate caches."""
        key = _key(rotations, stations)
        if key in self._split:
            self._split.move_to_end(key)
            return self._split[key]
        s = self.search
        charging = [r for r in _indexed(rotations) if s.requires_charging(r)]
        sched: ChargeSchedule | None
        if not charging:
            sched = ChargeSchedule(CAG)
        else:
            buses = extract_opportunities(charging, stations, s.instance, CAG)
            try:
                sched = solve_split_priority(buses, s.params, backend=s.config.csp_backend)
            except CspError:
                sched = None
        self._serial += 1
        self._remember(key, (self._serial, sched))
        return self._split[key]

    def split_cost(self, rotations: Sequence[Rotation], stations: frozenset) -> int:
        sched = self.split_schedule(rotations, stations)
        if sched is None:
            raise CspError("rotations are not serviceable under the open stations")
        return sched.total

    def clp(self, rotations: Sequence[Rotation], stations: frozenset):
        """CLP-CSP over the given candidates: (stations used, schedule)."""
        s = self.search
        charging = [r for r in _indexed(rotations) if s.requires_charging(r)]
        if not charging:
            return frozenset(), ChargeSchedule(CAG)
        buses = extract_opportunities(charging, stations, s.instance, CAG)
        return solve_clp_csp(buses, s.params, backend=s.config.csp_backend)

    # -- move ranking ------------------------------------------------------------

    def background(self, sched: ChargeSchedule, exclude: set[int]) -> dict[str, dict[int, float]]:
        bg: dict[str, dict[int, float]] = defaultdict(lambda: defaultdict(float))
        for (b, st, t), v in sched.transfers.items():
            if b not in exclude:
                bg[st][t] += v
        return {st: dict(d) for st, d in bg.items()}

    def _uniform_cost(self, rots: Sequence[Rotation], stations: frozenset, bg, bg_key) -> float | None:
        key = (tuple((r.start_depot, r.trips, r.end_depot) for r in rots), stations, bg_key)
        hit = self._uniform.get(key, False)
        if hit is not False:
            return hit
        s = self.search
        buses = extract_opportunities(rots, stations, s.instance, CAG)
        value = uniform_objective(buses, s.params, capacity="segment", background=bg,
                                  backend=s.config.csp_backend)
        if len(self._uniform) > 100_000:
            self._uniform = {}
        self._uniform[key] = value
        return value

    def move_delta(self, rotations: Sequence[Rotation], stations: frozenset, changes,
                   sched: ChargeSchedule, sched_key) -> int | None:
        """Uniform-CAG cost change (milli) of a move, None if the new buses cannot be served."""
        s = self.search
        touched = sorted({b for b, _ in changes})
        old = [rotations[b] for b in touched if s.requires_charging(rotations[b])]
        new = [r for _, r in changes if r is not None and s.requires_charging(r)]
        if not old and not new:
            return 0
        exclude = set(touched)
        stations_used = {st for (b, st, _) in sched.transfers if b in exclude}
        bg_full = self.background(sched, exclude)
        new_rots = [Rotation(k, r.start_depot, r.trips, r.end_depot) for k, r in enumerate(new)]
        old_rots = [Rotation(k, r.start_depot, r.trips, r.end_depot) for k, r in enumerate(old)]
        relevant = stations_used | {t.end_stop for r in new for t in _trips(s, r)} \
            | {t.start_stop for r in new for t in _trips(s, r)}
        bg = {st: d for st, d in bg_full.items() if st in relevant and st in stations}
        bg_key = (sched_key, tuple(touched))
        u_new = self._uniform_cost(new_rots, stations, bg, bg_key)
        if u_new is None:
            return None
        u_old = self._uniform_cost(old_rots, stations, bg, bg_key)
        if u_old is None:
            return None
        return to_milli(u_new) - to_milli(u_old)


def _trips(search, rot: Rotation):
    return [search.instance.trips[t] for t in rot.trips]


def _indexed(rotations: Sequence[Rotation]) -> list[Rotation]:
    return [r if r.bus_id == b else Rotation(b, r.start_depot, r.trips, r.end_depot)
            for b, r in enumerate(rotations)]
