"""Gateway, provider (with metadata cache), and function manager.

Every invocation takes the fixed three-RPC route: client -> gateway ->
provider -> function instance, with each leg costed by the platform's network
path model. The provider caches replica count and endpoint per function; the
cache is filled on first resolve and updated synchronously on the
gateway-mediated write path (deploy/scale/remove), so the manager is consulted
at most once between writes to a function.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .instances import BaseInstance, ContainerInstance, BypassInstance, SimContext
from .netmodel import PathKind, one_way_packet_cost
from .simcore import Dist, round_us


class PlatformError(Exception):
    pass


class NoSuchFunction(PlatformError):
    pass


class AlreadyDeployed(PlatformError):
    pass


class CapacityExhausted(PlatformError):
    pass


class ScaleMechanism(Enum):
    MULTI_PROCESS = "multi-process"
    RAISE_CORE_CAP = "raise-core-cap"
    NEW_INSTANCE = "new-instance"


@dataclass
class FunctionSpec:
    name: str
    base_service_us: float
    max_cores: int = 1
    scale_mechanism: ScaleMechanism = ScaleMechanism.MULTI_PROCESS
    backend: Optional[PathKind] = None
    service_sigma: float = 0.0  # 0 -> constant service time at base_service_us

    def __post_init__(self) -> None:
        if self.max_cores < 1:
            raise ValueError("max_cores must be >= 1")
        if self.base_service_us <= 0:
            raise ValueError("base_service_us must be > 0")

    def service_dist(self) -> Dist:
        if self.service_sigma > 0:
            return Dist.lognormal(self.base_service_us, self.service_sigma)
        return Dist.constant(self.base_service_us)


@dataclass
class ReplicaRecord:
    function: str
    replicas: int
    endpoint: tuple[int, int]  # (instance_id, port)
    instance_ids: list[int]


@dataclass
class InvocationRecord:
    id: int
    function: str
    submit_t: int
    gateway_t: int = -1
    provider_t: int = -1
    instance_t: int = -1
    complete_t: int = -1
    hop_costs: list[int] = field(default_factory=list)
    exec_us: int = 0
    queue_us: int = 0
    status: str = "pending"
    on_complete: Optional[Callable[["InvocationRecord"], None]] = None
    _finish: Optional[Callable[["InvocationRecord", int, str], None]] = None

    @property
    def e2e_us(self) -> int:
        return self.complete_t - self.submit_t

    def exec_done(self, now: int) -> None:
        assert self._finish is not None
        self._finish(self, now, "ok")

    def mark_rejected(self, now: int) -> None:
        assert self._finish is not None
        self._finish(self, now, "overload-rejected")

    def csv_row(self) -> str:
        hops = list(self.hop_costs) + [0] * (3 - len(self.hop_costs))
        return (f"{self.id},{self.function},{self.submit_t},{self.complete_t},"
                f"{self.e2e_us},{self.exec_us},{hops[0]},{hops[1]},{hops[2]},"
                f"{self.queue_us},{self.status}")


CSV_HEADER = ("id,function,submit_us,complete_us,e2e_us,exec_us,"
              "hop1_us,hop2_us,hop3_us,queue_us,status")


@dataclass
class Deployment:
    spec: FunctionSpec
    instances: list[BaseInstance]
    port: int
    scale: int = 1

    def live_record(self) -> ReplicaRecord:
        ids = [inst.instance_id for inst in self.instances]
        if self.spec.scale_mechanism is ScaleMechanism.RAISE_CORE_CAP:
            replicas = 1
        elif self.spec.scale_mechanism is ScaleMechanism.NEW_INSTANCE:
            replicas = len(self.instances)
        else:
            replicas = self.scale
        return ReplicaRecord(function=self.spec.name, replicas=replicas,
                             endpoint=(ids[0], self.port), instance_ids=ids)


class FunctionManager:
    """Authoritative deployment table; the source of truth the routing cache syncs to."""

    def __init__(self, platform: "Platform") -> None:
        self.platform = platform
        self.table: dict[str, Deployment] = {}
        self.query_count = 0
        self.query_count_by_fn: dict[str, int] = {}

    def lookup(self, name: str) -> Optional[Deployment]:
        self.query_count += 1
        self.query_count_by_fn[name] = self.query_count_by_fn.get(name, 0) + 1
        return self.table.get(name)

    def instance_count(self) -> int:
        return sum(len(d.instances) for d in self.table.values())


class Provider:
    """Routing service holding the per-function metadata cache."""

    def __init__(self, manager: FunctionManager) -> None:
        self.manager = manager
        self.cache: dict[str, ReplicaRecord] = {}
        self.hits = 0
        self.misses = 0

    def resolve(self, name: str) -> ReplicaRecord:
        if name in self.cache:
            self.hits += 1
            return self.cache[name]
        self.misses += 1
        dep = self.manager.lookup(name)
        if dep is None:
            # no negative caching: only live deployments are cached
            raise NoSuchFunction(name)
        record = dep.live_record()
        self.cache[name] = record
        return record

    def update(self, name: str, dep: Optional[Deployment]) -> None:
        """Write-through from the gateway-mediated write path."""
        if dep is None:
            self.cache.pop(name, None)
        elif name in self.cache:
            self.cache[name] = dep.live_record()


class Platform:
    """One simulated server hosting the control plane and function instances."""

    BASE_PORT = 8080

    def __init__(self, ctx: SimContext, container_cores: int = 2,
                 container_startup_us: int = 250_000, max_instances: int = 64) -> None:
        self.ctx = ctx
        self.kind = ctx.kind
        self.container_cores = container_cores
        self.container_startup_us = container_startup_us
        self.max_instances = max_instances
        self.manager = FunctionManager(self)
        self.provider = Provider(self.manager)
        self._next_instance_id = 0
        self._next_inv_id = 0
        self._rr: dict[str, int] = {}
        self.records: list[InvocationRecord] = []
        self.injected = 0
        self.completed_ok = 0
        self.failed = 0
        self.rejected = 0
        self.open_invocations = 0

    # ---- write path (deploy / scale / remove through the gateway) ----

    def deploy_function(self, spec: FunctionSpec) -> Deployment:
        if spec.name in self.manager.table:
            raise AlreadyDeployed(spec.name)
        if self.manager.instance_count() + 1 > self.max_instances:
            raise CapacityExhausted(spec.name)
        if spec.backend is None:
            spec.backend = self.kind
        inst = self._new_instance(spec)
        port = self.BASE_PORT + len(self.manager.table)
        dep = Deployment(spec=spec, instances=[inst], port=port, scale=1)
        self.manager.table[spec.name] = dep
        self.provider.update(spec.name, dep)
        return dep

    def scale_function(self, name: str, new_scale: int) -> ReplicaRecord:
        if new_scale < 1:
            raise ValueError("new_scale must be >= 1")
        dep = self.manager.table.get(name)
        if dep is None:
            raise NoSuchFunction(name)
        if new_scale != dep.scale:
            mech = dep.spec.scale_mechanism
            if mech is ScaleMechanism.MULTI_PROCESS:
                inst = dep.instances[0]
                if isinstance(inst, BypassInstance):
                    while len(inst.workers) < new_scale:
                        inst.add_worker()
                    while len(inst.workers) > new_scale:
                        inst.remove_worker()
                elif isinstance(inst, ContainerInstance):
                    inst.procs = new_scale
            elif mech is ScaleMechanism.RAISE_CORE_CAP:
                dep.spec.max_cores = new_scale
                inst = dep.instances[0]
                if isinstance(inst, BypassInstance):
                    inst.cap = new_scale
                elif isinstance(inst, ContainerInstance):
                    inst.cores = new_scale
            else:  # NEW_INSTANCE
                grow = new_scale - len(dep.instances)
                if grow > 0 and self.manager.instance_count() + grow > self.max_instances:
                    raise CapacityExhausted(name)
                while len(dep.instances) < new_scale:
                    dep.instances.append(self._new_instance(dep.spec))
                while len(dep.instances) > new_scale:
                    gone = dep.instances.pop()
                    if self.ctx.scheduler is not None:
                        self.ctx.scheduler.unregister(gone.instance_id)
            dep.scale = new_scale
            self.provider.update(name, dep)
        return dep.live_record()

    def remove_function(self, name: str) -> None:
        dep = self.manager.table.pop(name, None)
        if dep is None:
            raise NoSuchFunction(name)
        if self.ctx.scheduler is not None:
            for inst in dep.instances:
                self.ctx.scheduler.unregister(inst.instance_id)
        self.provider.update(name, None)

    def _new_instance(self, spec: FunctionSpec) -> BaseInstance:
        iid = self._next_instance_id
        self._next_instance_id += 1
        now = self.ctx.engine.now
        kind = spec.backend or self.kind
        if kind is PathKind.BYPASS:
            inst = BypassInstance(self.ctx, iid, spec.name, spec.service_dist(),
                                    ready_t=now + 3400, cap=spec.max_cores)
            assert self.ctx.scheduler is not None, "bypass instances need the core scheduler"
            self.ctx.scheduler.register(inst)
        else:
            inst = ContainerInstance(self.ctx, iid, spec.name, spec.service_dist(),
                                     ready_t=now + self.container_startup_us,
                                     cores=self.container_cores,
                                     startup_us=self.container_startup_us)
        self.ctx.engine.schedule(inst.ready_t, "instance-ready",
                                 detail=f"inst={iid},fn={spec.name}")
        return inst

    def ready_time(self, name: str) -> int:
        dep = self.manager.table[name]
        return max(inst.ready_t for inst in dep.instances)

    # ---- invocation path ----

    def submit(self, name: str, at: int, req_bytes: int = 600, resp_bytes: int = 600,
               on_complete: Optional[Callable[[InvocationRecord], None]] = None
               ) -> InvocationRecord:
        inv = InvocationRecord(id=self._next_inv_id, function=name, submit_t=at,
                               on_complete=on_complete)
        self._next_inv_id += 1
        self.injected += 1
        self.open_invocations += 1
        self.records.append(inv)
        legs = [round_us(one_way_packet_cost(self.kind, b, self.ctx.path_params))
                for b in (req_bytes, req_bytes, req_bytes, resp_bytes, resp_bytes, resp_bytes)]
        f1, f2, f3, r3, r2, r1 = legs
        inv._finish = lambda rec, t, status, legs=(r1, r2, r3): \
            self._finish_from_instance(rec, t, status, legs)
        self.ctx.engine.schedule(at, "load-arrival",
                                 lambda: self._at_gateway(inv, f1, f2, f3, r1, r2, r3),
                                 detail=f"inv={inv.id},fn={name}")
        return inv

    def _at_gateway(self, inv: InvocationRecord, f1: int, f2: int, f3: int,
                    r1: int, r2: int, r3: int) -> None:
        self.ctx.engine.schedule(self.ctx.engine.now + f1, "rpc-complete",
                                 lambda: self._gateway_handle(inv, f1, f2, f3, r1, r2, r3),
                                 detail=f"inv={inv.id},hop=gateway")

    def _gateway_handle(self, inv: InvocationRecord, f1: int, f2: int, f3: int,
                        r1: int, r2: int, r3: int) -> None:
        inv.gateway_t = self.ctx.engine.now
        self.ctx.engine.schedule(inv.gateway_t + f2, "rpc-complete",
                                 lambda: self._at_provider(inv, f1, f2, f3, r1, r2, r3),
                                 detail=f"inv={inv.id},hop=provider")

    def _at_provider(self, inv: InvocationRecord, f1: int, f2: int, f3: int,
                     r1: int, r2: int, r3: int) -> None:
        inv.provider_t = self.ctx.engine.now
        try:
            record = self.provider.resolve(inv.function)
        except NoSuchFunction:
            inv.hop_costs = [f1 + r1, f2 + r2]
            self._complete(inv, inv.provider_t + r2 + r1, "no-such-function")
            return
        inv.hop_costs = [f1 + r1, f2 + r2, f3 + r3]
        inst = self._pick_replica(inv.function, record)
        self.ctx.engine.schedule(inv.provider_t + f3, "rpc-complete",
                                 lambda: inst.enqueue(inv),
                                 detail=f"inv={inv.id},hop=instance")

    def _pick_replica(self, name: str, record: ReplicaRecord) -> BaseInstance:
        dep = self.manager.table[name]
        idx = self._rr.get(name, 0)
        self._rr[name] = idx + 1
        return dep.instances[idx % len(dep.instances)]

    def _finish_from_instance(self, inv: InvocationRecord, t: int, status: str,
                              resp_legs: tuple[int, int, int]) -> None:
        r1, r2, r3 = resp_legs
        self._complete(inv, t + r3 + r2 + r1, status)

    def _complete(self, inv: InvocationRecord, at: int, status: str) -> None:
        def deliver() -> None:
            inv.complete_t = self.ctx.engine.now
            inv.status = status
            self.open_invocations -= 1
            if status == "ok":
                self.completed_ok += 1
            elif status == "overload-rejected":
                self.rejected += 1
            else:
                self.failed += 1
            self.check_conservation()
            if inv.on_complete is not None:
                inv.on_complete(inv)
        self.ctx.engine.schedule(at, "rpc-complete", deliver,
                                 detail=f"inv={inv.id},status={status}")

    # ---- accounting ----

    def check_conservation(self) -> None:
        total = self.completed_ok + self.failed + self.rejected + self.open_invocations
        if total != self.injected:
            raise AssertionError(
                f"conservation violated: injected={self.injected} "
                f"ok={self.completed_ok} failed={self.failed} "
                f"rejected={self.rejected} open={self.open_invocations}")

    def write_invocation_log(self, path: str) -> None:
        with open(path, "w") as f:
            f.write(CSV_HEADER + "\n")
            for rec in self.records:
                f.write(rec.csv_row() + "\n")
