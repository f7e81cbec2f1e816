"""Time sources. Simulated clock makes every timing contract deterministic."""

from __future__ import annotations

import time


class RealClock:
    def now_ms(self) -> int:
        return int(time.time() * 1000)

    def sleep_until(self, t_ms: int) -> None:
        delta = t_ms - self.now_ms()
        if delta > 0:
            time.sleep(delta / 1000.0)


class SimulatedClock:
    """Manually advanced clock starting at a fixed epoch (default 0)."""

    def __init__(self, start_ms: int = 0):
        self._now = start_ms

    def now_ms(self) -> int:
        return self._now

    def advance_to(self, t_ms: int) -> None:
        if t_ms < self._now:
            raise ValueError(f"clock cannot move backwards ({t_ms} < {self._now})")
        self._now = t_ms

    def advance_by(self, delta_ms: int) -> None:
        self.advance_to(self._now + delta_ms)

    def sleep_until(self, t_ms: int) -> None:
        if t_ms > self._now:
            self.advance_to(t_ms)
