"""Discrete-event engine: integer-microsecond clock, event queue and link model."""

from __future__ import annotations

import heapq
import random
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence, Union

SECOND = 1_000_000
MILLISECOND = 1_000


def seconds(value: float) -> int:
    """Convert seconds to integer simulation microseconds."""
    return int(round(value * SECOND))


def millis(value: float) -> int:
    return int(round(value * MILLISECOND))


def to_seconds(t: int) -> float:
    return t / SECOND


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


@dataclass(order=True)
class Event:
    fire_at: int
    seq: int
    action: Callable[..., Any] = field(compare=False)
    payload: Any = field(default=None, compare=False)
    target: str = field(default="", compare=False)
    cancelled: bool = field(default=False, compare=False)

    def cancel(self) -> None:
        self.cancelled = True


class Simulator:
    """Single-threaded event loop ordered by ``(fire_at, seq)``."""

    def __init__(self, seed: int = 0):
        self.now = 0
        self.seed = seed
        self._queue: list[Event] = []
        self._seq = 0
        self.processed = 0

    def schedule(self, fire_at: int, action: Callable[..., Any], payload: Any = None,
                 target: str = "") -> Event:
        if fire_at < self.now:
            raise SchedulingError(
                f"event for {target or action!r} at t={fire_at}us is before clock t={self.now}us")
        self._seq += 1
        ev = Event(int(fire_at), self._seq, action, payload, target)
        heapq.heappush(self._queue, ev)
        return ev

    def schedule_in(self, delay: int, action: Callable[..., Any], payload: Any = None,
                    target: str = "") -> Event:
        return self.schedule(self.now + delay, action, payload, target)

    def pending(self) -> int:
        return sum(1 for ev in self._queue if not ev.cancelled)

    def run_until(self, t_end: int) -> None:
        queue = self._queue
        while queue and queue[0].fire_at <= t_end:
            ev = heapq.heappop(queue)
            if ev.cancelled:
                continue
            self.now = ev.fire_at
            self.processed += 1
            if ev.payload is None:
                ev.action()
            else:
                ev.action(ev.payload)
        if t_end > self.now:
            self.now = t_end

    def rng(self, stream: str) -> random.Random:
        """Independent deterministic random stream named ``stream``."""
        return random.Random(f"{self.seed}:{stream}")


@dataclass(frozen=True)
class Delivered:
    arrival: int
    service_start: int


@dataclass(frozen=True)
class Lost:
    lost_at: int


@dataclass(frozen=True)
class QueueDrop:
    at: int


TransmitOutcome = Union[Delivered, Lost, QueueDrop]


class LossSchedule:
    """Piecewise-constant loss probability over simulation time.

    ``points`` is a sequence of ``(start_us, prob)`` pairs; the probability of
    the latest start not after ``t`` applies.
    """

    def __init__(self, points: Union[float, Sequence[tuple[int, float]]] = 0.0):
        if isinstance(points, (int, float)):
            points = [(0, float(points))]
        pts = sorted((int(t), float(p)) for t, p in points)
        if not pts or pts[0][0] > 0:
            pts.insert(0, (0, 0.0))
        for _, p in pts:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"loss probability {p} outside [0, 1]")
        self._starts = [t for t, _ in pts]
        self._probs = [p for _, p in pts]

    def at(self, t: int) -> float:
        return self._probs[bisect_right(self._starts, t) - 1]

    def is_deterministic(self) -> bool:
        return all(p in (0.0, 1.0) for p in self._probs)


class Link:
    """Unidirectional FIFO channel with serialization, propagation and loss.

    Frames are served in send order; a lost frame still occupies the link for
    its full serialization time. ``queue_capacity`` counts frames not yet fully
    serialized (0 means unbounded).
    """

    def __init__(self, name: str, bandwidth_bps: float, propagation_us: int,
                 loss: Union[float, LossSchedule, Sequence[tuple[int, float]]] = 0.0,
                 queue_capacity: int = 0, air: bool = False,
                 rng: Optional[random.Random] = None):
        if bandwidth_bps <= 0:
            raise ValueError(f"link {name}: bandwidth must be positive")
        if propagation_us < 0:
            raise ValueError(f"link {name}: negative propagation delay")
        self.name = name
        self.bandwidth_bps = int(round(bandwidth_bps))
        self.propagation_us = int(propagation_us)
        self.loss = loss if isinstance(loss, LossSchedule) else LossSchedule(loss)
        self.loss_override: Optional[float] = None
        self.queue_capacity = int(queue_capacity)
        self.air = air
        self.busy_until = 0
        self.rng = rng or random.Random(name)
        self._in_service: deque[int] = deque()
        self.sent_frames = 0
        self.sent_bytes = 0

    def serialization_us(self, frame_bytes: int) -> int:
        return -(-frame_bytes * 8 * SECOND // self.bandwidth_bps)

    def loss_prob(self, t: int) -> float:
        if self.loss_override is not None:
            return self.loss_override
        return self.loss.at(t)

    def backlog(self, now: int) -> int:
        q = self._in_service
        while q and q[0] <= now:
            q.popleft()
        return len(q)

    def transmit(self, frame_bytes: int, now: int,
                 rng: Optional[random.Random] = None) -> TransmitOutcome:
        if frame_bytes <= 0:
            raise ValueError("frame_bytes must be positive")
        if self.queue_capacity and self.backlog(now) >= self.queue_capacity:
            return QueueDrop(now)
        start = max(now, self.busy_until)
        done = start + self.serialization_us(frame_bytes)
        self.busy_until = done
        self._in_service.append(done)
        self.sent_frames += 1
        self.sent_bytes += frame_bytes
        # always draw so the stream position does not depend on the loss value
        draw = (rng or self.rng).random()
        if draw < self.loss_prob(now):
            return Lost(done)
        return Delivered(done + self.propagation_us, start)
