"""Deterministic simulation clock.

The clock is the single time source for every timestamp in the cell;
wall-clock time appears only in persistence metadata. Time is derived from
an integer tick counter (``now = ticks * dt`` as one multiplication) so
that identical scripts produce bitwise-identical timestamps.
"""

from __future__ import annotations

from .errors import InvalidValue


class SimClock:
    def __init__(self, dt: float = 0.01):
        if dt <= 0:
            raise InvalidValue("dt must be > 0")
        self.dt = float(dt)
        self.ticks = 0

    @property
    def now(self) -> float:
        return self.ticks * self.dt

    def advance(self, n: int = 1) -> float:
        if n < 1:
            raise InvalidValue("advance by at least one tick")
        self.ticks += n
        return self.now

    def __repr__(self):
        return f"SimClock(t={self.now:.3f}, dt={self.dt})"
