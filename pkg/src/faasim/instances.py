"""Execution backends: bypass instances fed by the core scheduler, and
container instances with a fixed OS core share.

Both kinds keep a FIFO request queue with a bounded length, serve at most as
many requests concurrently as they have cores, and charge execution time
through the netmodel compute path for their backend kind.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Optional

from .netmodel import ComputeParams, PathKind, PathParams, service_time
from .sched import CoreScheduler, InstanceSignals
from .simcore import Dist, Engine, RngStream, round_us

if TYPE_CHECKING:
    from .controlplane import InvocationRecord

BYPASS_INIT_US = 3400


class OverloadRejected(Exception):
    pass


@dataclass
class SimContext:
    """Shared simulation plumbing handed to every instance."""
    engine: Engine
    kind: PathKind
    path_params: PathParams
    compute_params: ComputeParams
    rng_service: RngStream
    rng_jitter: RngStream
    queue_cap: int = 1024
    scheduler: Optional[CoreScheduler] = None


@dataclass
class Worker:
    worker_id: int
    function: str
    runnable_threads: int = 0
    busy_until: list[int] = field(default_factory=list)


class BaseInstance:
    """Queueing and accounting shared by both backend kinds."""

    def __init__(self, ctx: SimContext, instance_id: int, function: str,
                 service_dist: Dist, ready_t: int) -> None:
        self.ctx = ctx
        self.instance_id = instance_id
        self.function = function
        self.service_dist = service_dist
        self.ready_t = ready_t
        self.queue: deque["InvocationRecord"] = deque()
        self.in_service = 0
        self.enqueued = 0
        self.completed = 0
        self.rejected = 0

    @property
    def live(self) -> bool:
        return self.ctx.engine.now >= self.ready_t

    def capacity(self) -> int:
        raise NotImplementedError

    def enqueue(self, inv: "InvocationRecord") -> None:
        raise NotImplementedError

    def _reject(self, inv: "InvocationRecord") -> None:
        self.rejected += 1
        inv.mark_rejected(self.ctx.engine.now)

    def _admit_ready(self, now: int) -> bool:
        return True

    def _try_admit(self) -> None:
        now = self.ctx.engine.now
        while self.queue and self.in_service < self.capacity() and self._admit_ready(now):
            inv = self.queue.popleft()
            self._start_service(inv, now)

    def _start_service(self, inv: "InvocationRecord", now: int) -> None:
        base = self.ctx.rng_service.draw(self.service_dist)
        exec_us = round_us(service_time(self.ctx.kind, base, self.ctx.compute_params,
                                        self.ctx.rng_jitter))
        self.in_service += 1
        inv.queue_us = now - inv.instance_t
        inv.exec_us = exec_us
        self.ctx.engine.schedule(now + exec_us, "service-complete",
                                 lambda i=inv: self._complete_service(i),
                                 detail=f"inst={self.instance_id},inv={inv.id}")

    def _complete_service(self, inv: "InvocationRecord") -> None:
        self.in_service -= 1
        self.completed += 1
        self._after_completion()
        inv.exec_done(self.ctx.engine.now)
        self._try_admit()

    def _after_completion(self) -> None:
        pass

    def counts(self) -> dict[str, int]:
        return {
            "enqueued": self.enqueued,
            "completed": self.completed,
            "in_service": self.in_service,
            "queued": len(self.queue),
            "rejected": self.rejected,
        }


class BypassInstance(BaseInstance):
    """Bypass instance: worker processes sharing one user-space runtime and a packet
    queue, with cores granted dynamically by the central scheduler.

    NIC queue pairs scale with the maximum core cap; the packet queue is
    modeled as a single FIFO, multiple pairs only raise the concurrency cap.
    A revoked core finishes its in-flight request before it is handed back.
    """

    def __init__(self, ctx: SimContext, instance_id: int, function: str,
                 service_dist: Dist, ready_t: int, cap: int) -> None:
        super().__init__(ctx, instance_id, function, service_dist, ready_t)
        self.cap = cap
        self.workers: list[Worker] = [Worker(0, function)]
        self.eventq_pending = 0
        self.cores_granted = 0
        self.cores_target = 0
        self.init_us = BYPASS_INIT_US

    @property
    def queue_pairs(self) -> int:
        return max(1, self.cap)

    def capacity(self) -> int:
        return self.cores_granted

    def signals(self) -> InstanceSignals:
        return InstanceSignals(
            instance_id=self.instance_id,
            runnable_threads=self.in_service + len(self.queue),
            eventq_pending=self.eventq_pending,
            allocated=self.cores_granted,
            cap=self.cap,
        )

    def enqueue(self, inv: "InvocationRecord") -> None:
        now = self.ctx.engine.now
        if now < self.ready_t:
            self.ctx.engine.schedule(self.ready_t, "instance-ready",
                                     lambda i=inv: self.enqueue(i),
                                     detail=f"inst={self.instance_id}")
            return
        if len(self.queue) >= self.ctx.queue_cap:
            self._reject(inv)
            return
        self.enqueued += 1
        inv.instance_t = now
        self.queue.append(inv)
        assert self.ctx.scheduler is not None
        self.ctx.scheduler.signal_eventq(self.instance_id)

    def apply_grant(self, new: int, now: int) -> None:
        self.cores_target = new
        if new >= self.cores_granted:
            self.cores_granted = new
            self._try_admit()
        else:
            # idle surplus cores are revoked immediately; busy ones at completion
            self.cores_granted = max(new, self.in_service)

    def _after_completion(self) -> None:
        if self.cores_granted > self.cores_target:
            self.cores_granted = max(self.cores_target, self.in_service)
        if self.ctx.scheduler is not None:
            self.ctx.scheduler.notify(self.instance_id)

    def add_worker(self) -> Worker:
        up = Worker(len(self.workers), self.function)
        self.workers.append(up)
        return up

    def remove_worker(self) -> None:
        if len(self.workers) <= 1:
            raise ValueError("instance must keep at least one worker")
        self.workers.pop()


class ContainerInstance(BaseInstance):
    """Kernel-path instance: a container with a fixed OS core share.

    Each request wakeup pays an interrupt plus a context switch before it can
    be admitted; the cost lands in the request's queueing time.
    """

    def __init__(self, ctx: SimContext, instance_id: int, function: str,
                 service_dist: Dist, ready_t: int, cores: int,
                 startup_us: int) -> None:
        super().__init__(ctx, instance_id, function, service_dist, ready_t)
        self.cores = cores
        self.procs = 1
        self.init_us = startup_us

    def capacity(self) -> int:
        return self.cores

    def wakeup_us(self) -> int:
        p = self.ctx.path_params
        return round_us(p.interrupt_cost + p.ctx_switch_cost)

    def _admit_ready(self, now: int) -> bool:
        head = self.queue[0]
        return now >= head.instance_t + self.wakeup_us()

    def enqueue(self, inv: "InvocationRecord") -> None:
        now = self.ctx.engine.now
        if now < self.ready_t:
            self.ctx.engine.schedule(self.ready_t, "instance-ready",
                                     lambda i=inv: self.enqueue(i),
                                     detail=f"inst={self.instance_id}")
            return
        if len(self.queue) >= self.ctx.queue_cap:
            self._reject(inv)
            return
        self.enqueued += 1
        inv.instance_t = now
        self.queue.append(inv)
        wake = self.wakeup_us()
        if wake > 0:
            self.ctx.engine.schedule(now + wake, "instance-wakeup", self._try_admit,
                                     detail=f"inst={self.instance_id}")
        else:
            self._try_admit()
