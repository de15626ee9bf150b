from __future__ import annotations

from fractions import Fraction


class SimClock:
    """Fixed-step clock; time is ``tick_count * dt`` computed in exact rationals."""

    def __init__(self, rate_hz: int):
        if int(rate_hz) != rate_hz or rate_hz <= 0:
            raise ValueError("clock rate must be a positive integer Hz")
        self.rate = int(rate_hz)
        self.dt_exact = Fraction(1, self.rate)
        self.dt = float(self.dt_exact)
        self.tick_count = 0

    @property
    def t(self) -> float:
        return float(self.tick_count * self.dt_exact)

    def advance(self) -> float:
        self.tick_count += 1
        return self.t
