"""Search configuration, moves and the convergence log."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

SEQUENTIAL, JOINT = "sequential", "joint"

EXCHANGE_TRIPS = "ExchangeTrips"
SHIFT_TRIP = "ShiftTrip"
EXCHANGE_DEPOTS = "ExchangeDepots"
MULTI_SHIFT = "MultiShift"
OPEN_STATIONS = "OpenStations"
CLOSE_STATION = "CloseStation"
MOVE_KINDS = (EXCHANGE_TRIPS, SHIFT_TRIP, EXCHANGE_DEPOTS, MULTI_SHIFT, OPEN_STATIONS, CLOSE_STATION)

NO_MOVE = float("-inf")


@dataclass(frozen=True)
class IlsConfig:
    mode: str = SEQUENTIAL
    zeta: int = 5  # rotations with at most zeta trips are multi-shift candidates
    hybrid_k: int | None = 400  # None evaluates every move with the LP (Joint mode)
    improvement_eps: int = 1  # milli-dollars
    parallel: bool = False
    threads: int | None = None  # None reads EBUSOPT_THREADS
    seed: int = 0
    open_order: str = "ascending"  # order of sigma_pot when opening stations
    max_iterations: int = 100_000  # per OptimizeRotations call
    csp_backend: str = "native"
    final_backend: str | None = None  # defaults to csp_backend
    final_time_limit: float = 120.0
    final_max_nodes: int = 20_000

    def __post_init__(self):
        if self.mode not in (SEQUENTIAL, JOINT):
            raise ValueError(f"mode must be {SEQUENTIAL!r} or {JOINT!r}")
        if self.zeta < 1:
            raise ValueError("zeta must be >= 1")
        if self.hybrid_k is not None and self.hybrid_k < 1:
            raise ValueError("hybrid_k must be >= 1")
        if self.improvement_eps < 1:
            raise ValueError("improvement_eps must be a positive number of milli-dollars")
        if self.open_order not in ("ascending", "descending"):
            raise ValueError("open_order must be ascending or descending")

    def n_threads(self) -> int:
        if not self.parallel:
            return 1
        if self.threads is not None:
            return max(1, int(self.threads))
        env = os.environ.get("EBUSOPT_THREADS")
        if env:
            return max(1, int(env))
        return max(1, os.cpu_count() or 1)


@dataclass(frozen=True)
class Move:
    """A candidate change. savings > 0 improves; NO_MOVE marks 'nothing found'."""

    kind: str
    payload: tuple
    savings: float = NO_MOVE
    rotations: tuple | None = field(default=None, compare=False, repr=False)

    @property
    def found(self) -> bool:
        return self.savings != NO_MOVE
