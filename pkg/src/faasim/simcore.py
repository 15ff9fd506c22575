"""Deterministic discrete-event engine: virtual clock, ordered event queue,
seeded per-component random streams.

Virtual time is integer microseconds. Events are dispatched in strict
(fire_at, seq) order, where seq is the scheduling sequence number; this makes
every run a pure function of (seed, config).
"""
from __future__ import annotations

import hashlib
import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Optional


class ContractViolation(Exception):
    """A caller broke an engine precondition (e.g. scheduling into the past)."""


class InvalidDistribution(ValueError):
    """Distribution parameters outside their valid domain."""


@dataclass
class Event:
    fire_at: int
    seq: int
    kind: str
    detail: str = ""
    callback: Optional[Callable[[], None]] = None
    cancelled: bool = False

    def sort_key(self) -> tuple[int, int]:
        return (self.fire_at, self.seq)


@dataclass
class TraceEntry:
    time_us: int
    kind: str
    detail: str

    def line(self) -> str:
        return f"{self.time_us},{self.kind},{self.detail}"


class Engine:
    """Single-threaded event loop over virtual microseconds."""

    def __init__(self) -> None:
        self.now: int = 0
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self.trace: list[TraceEntry] = []
        self.scheduled_count = 0
        self.dispatched_count = 0

    @property
    def queued_count(self) -> int:
        return sum(1 for _, _, ev in self._heap if not ev.cancelled)

    def schedule(self, fire_at: int, kind: str, callback: Optional[Callable[[], None]] = None,
                 detail: str = "") -> Event:
        fire_at = int(fire_at)
        if fire_at < self.now:
            raise ContractViolation(
                f"cannot schedule event '{kind}' at t={fire_at} (now={self.now})")
        ev = Event(fire_at=fire_at, seq=self._seq, kind=kind, detail=detail, callback=callback)
        self._seq += 1
        self.scheduled_count += 1
        heapq.heappush(self._heap, (fire_at, ev.seq, ev))
        return ev

    def cancel(self, ev: Event) -> None:
        if not ev.cancelled:
            ev.cancelled = True
            self.scheduled_count -= 1

    def run_until(self, t_end: int) -> list[TraceEntry]:
        """Dispatch every event with fire_at <= t_end; advance now to t_end."""
        if t_end < self.now:
            raise ContractViolation(f"run_until({t_end}) with now={self.now}")
        start = len(self.trace)
        while self._heap and self._heap[0][0] <= t_end:
            _, _, ev = heapq.heappop(self._heap)
            if ev.cancelled:
                continue
            assert ev.fire_at >= self.now
            self.now = ev.fire_at
            self.dispatched_count += 1
            self.trace.append(TraceEntry(ev.fire_at, ev.kind, ev.detail))
            if ev.callback is not None:
                ev.callback()
        self.now = t_end
        return self.trace[start:]

    def run_until_idle(self, hard_limit: int) -> list[TraceEntry]:
        """Run until no events remain, but never past hard_limit."""
        start = len(self.trace)
        while True:
            nxt = self._next_pending_time()
            if nxt is None or nxt > hard_limit:
                break
            self.run_until(nxt)
        return self.trace[start:]

    def _next_pending_time(self) -> Optional[int]:
        while self._heap and self._heap[0][2].cancelled:
            heapq.heappop(self._heap)
        return self._heap[0][0] if self._heap else None

    def write_trace(self, path: str) -> None:
        with open(path, "w") as f:
            for entry in self.trace:
                f.write(entry.line() + "\n")


@dataclass(frozen=True)
class Dist:
    """Distribution spec: constant(value), exponential(rate), lognormal(mu, sigma).

    lognormal is parameterised by the median (exp(mu)) and sigma for
    readability in configs.
    """
    kind: str
    a: float = 0.0
    b: float = 0.0

    @staticmethod
    def constant(value: float) -> "Dist":
        if value < 0:
            raise InvalidDistribution(f"constant value must be >= 0, got {value}")
        return Dist("constant", value)

    @staticmethod
    def exponential(rate: Optional[float] = None, mean: Optional[float] = None) -> "Dist":
        if rate is None:
            if mean is None or mean <= 0:
                raise InvalidDistribution(f"exponential mean must be > 0, got {mean}")
            rate = 1.0 / mean
        if rate <= 0:
            raise InvalidDistribution(f"exponential rate must be > 0, got {rate}")
        return Dist("exponential", rate)

    @staticmethod
    def lognormal(median: float, sigma: float) -> "Dist":
        if median <= 0:
            raise InvalidDistribution(f"lognormal median must be > 0, got {median}")
        if sigma <= 0:
            raise InvalidDistribution(f"lognormal sigma must be > 0, got {sigma}")
        return Dist("lognormal", median, sigma)

    @property
    def mean(self) -> float:
        if self.kind == "constant":
            return self.a
        if self.kind == "exponential":
            return 1.0 / self.a
        return self.a * math.exp(self.b * self.b / 2.0)

    @staticmethod
    def from_dict(d: dict) -> "Dist":
        kind = d["kind"]
        if kind == "constant":
            return Dist.constant(d["value"])
        if kind == "exponential":
            return Dist.exponential(rate=d.get("rate"), mean=d.get("mean"))
        if kind == "lognormal":
            return Dist.lognormal(d["median"], d["sigma"])
        raise InvalidDistribution(f"unknown distribution kind {kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.a}
        if self.kind == "exponential":
            return {"kind": "exponential", "rate": self.a}
        return {"kind": "lognormal", "median": self.a, "sigma": self.b}


class RngStream:
    """Named random stream; (seed, stream_id, draw index) fully determines values.

    Each stream derives its own 64-bit seed from sha256(seed:stream_id), so
    streams with different ids are independent and draws on one stream never
    perturb another.
    """

    def __init__(self, seed: int, stream_id: str) -> None:
        self.seed = seed
        self.stream_id = stream_id
        digest = hashlib.sha256(f"{seed}:{stream_id}".encode()).digest()
        self._rng = random.Random(int.from_bytes(digest[:8], "big"))
        self.draw_index = 0

    def draw(self, dist: Dist) -> float:
        self.draw_index += 1
        if dist.kind == "constant":
            # consume a variate so stream position stays dist-independent
            self._rng.random()
            return dist.a
        if dist.kind == "exponential":
            return self._rng.expovariate(dist.a)
        return self._rng.lognormvariate(math.log(dist.a), dist.b)

    def uniform(self) -> float:
        self.draw_index += 1
        return self._rng.random()

    def randint(self, a: int, b: int) -> int:
        self.draw_index += 1
        return self._rng.randint(a, b)


class RngRegistry:
    """Hands out one RngStream per component label from a single root seed."""

    def __init__(self, seed: int) -> None:
        self.seed = seed
        self._streams: dict[str, RngStream] = {}

    def stream(self, stream_id: str) -> RngStream:
        if stream_id not in self._streams:
            self._streams[stream_id] = RngStream(self.seed, stream_id)
        return self._streams[stream_id]


def round_us(x: float) -> int:
    """Half-up rounding to integer microseconds."""
    return int(math.floor(x + 0.5))
