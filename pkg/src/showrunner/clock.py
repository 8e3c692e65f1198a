"""Time sources and the event scheduler.

All timestamps in the engine flow through one TimeSource so the same code
runs against the wall clock (live shows) or a virtual clock (replay, bench,
tests). The scheduler executes callbacks in (timestamp, insertion-order)
order; in virtual mode it is the single scheduler that drives the whole
engine deterministically.
"""

from __future__ import annotations

import heapq
import threading
import time
from typing import Callable, Optional


class TimeSource:
    def now_ms(self) -> int:
        raise NotImplementedError


class VirtualClock(TimeSource):
    """Deterministic clock; advances only when the scheduler executes events."""

    def __init__(self, start_ms: int = 0):
        self._now_ms = start_ms

    def now_ms(self) -> int:
        return self._now_ms

    def advance_to(self, t_ms: int) -> None:
        if t_ms < self._now_ms:
            raise ValueError(f"clock cannot go backwards: {t_ms} < {self._now_ms}")
        self._now_ms = t_ms


class WallClock(TimeSource):
    def __init__(self):
        self._t0_ns = time.monotonic_ns()

    def now_ms(self) -> int:
        return (time.monotonic_ns() - self._t0_ns) // 1_000_000


class Scheduled:
    """Cancellable handle for a scheduled callback."""

    __slots__ = ("t_ms", "seq", "fn", "cancelled")

    def __init__(self, t_ms: int, seq: int, fn: Callable[[], None]):
        self.t_ms = t_ms
        self.seq = seq
        self.fn = fn
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True

    def __lt__(self, other: "Scheduled") -> bool:
        return (self.t_ms, self.seq) < (other.t_ms, other.seq)


class EventScheduler:
    """Priority queue of timed callbacks over a TimeSource.

    Virtual mode: call run_until_idle() (or run_until) to execute events,
    jumping the clock to each event's timestamp. Real-time mode: start_pump()
    launches a thread that fires events when the wall clock reaches them.
    Callbacks are executed outside the internal lock, so they may schedule
    further events and take their own locks.
    """

    def __init__(self, clock: TimeSource):
        self.clock = clock
        self._heap: list[Scheduled] = []
        self._seq = 0
        self._lock = threading.Lock()
        self._wakeup = threading.Condition(self._lock)
        self._pump: Optional[threading.Thread] = None
        self._stopping = False

    def now_ms(self) -> int:
        return self.clock.now_ms()

    def call_at(self, t_ms: int, fn: Callable[[], None]) -> Scheduled:
        with self._lock:
            item = Scheduled(max(t_ms, self.clock.now_ms()), self._seq, fn)
            self._seq += 1
            heapq.heappush(self._heap, item)
            self._wakeup.notify()
            return item

    def call_later(self, delay_ms: int, fn: Callable[[], None]) -> Scheduled:
        return self.call_at(self.clock.now_ms() + delay_ms, fn)

    def pending(self) -> int:
        with self._lock:
            return sum(1 for item in self._heap if not item.cancelled)

    def _pop_due(self, horizon_ms: Optional[int]) -> Optional[Scheduled]:
        with self._lock:
            while self._heap:
                if self._heap[0].cancelled:
                    heapq.heappop(self._heap)
                    continue
                if horizon_ms is not None and self._heap[0].t_ms > horizon_ms:
                    return None
                return heapq.heappop(self._heap)
            return None

    # virtual-time driving

    def run_until_idle(self, max_events: int = 10_000_000) -> int:
        """Execute events in order until none remain. Returns events run."""
        if not isinstance(self.clock, VirtualClock):
            raise RuntimeError("run_until_idle requires a virtual clock")
        ran = 0
        while ran < max_events:
            item = self._pop_due(None)
            if item is None:
                return ran
            self.clock.advance_to(max(item.t_ms, self.clock.now_ms()))
            item.fn()
            ran += 1
        raise RuntimeError("event budget exhausted; runaway schedule?")

    def run_until(self, t_ms: int) -> int:
        """Execute events with timestamp <= t_ms, then set the clock to t_ms."""
        if not isinstance(self.clock, VirtualClock):
            raise RuntimeError("run_until requires a virtual clock")
        ran = 0
        while True:
            item = self._pop_due(t_ms)
            if item is None:
                break
            self.clock.advance_to(max(item.t_ms, self.clock.now_ms()))
            item.fn()
            ran += 1
        if t_ms > self.clock.now_ms():
            self.clock.advance_to(t_ms)
        return ran

    # real-time driving

    def start_pump(self) -> None:
        if self._pump is not None:
            return
        self._stopping = False
        self._pump = threading.Thread(target=self._pump_loop, daemon=True)
        self._pump.start()

    def stop_pump(self) -> None:
        with self._lock:
            self._stopping = True
            self._wakeup.notify()
        if self._pump is not None:
            self._pump.join(timeout=5)
            self._pump = None

    def _pump_loop(self) -> None:
        while True:
            with self._lock:
                if self._stopping:
                    return
                while self._heap and self._heap[0].cancelled:
                    heapq.heappop(self._heap)
                if not self._heap:
                    self._wakeup.wait(timeout=0.5)
                    continue
                wait_ms = self._heap[0].t_ms - self.clock.now_ms()
                if wait_ms > 0:
                    self._wakeup.wait(timeout=wait_ms / 1000.0)
                    continue
                item = heapq.heappop(self._heap)
            item.fn()
