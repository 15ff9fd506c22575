"""Run configuration: one JSON document fully determines a run.

Every stochastic component draws from a named stream derived from the single
seed here; there is no wall-clock seeding anywhere.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Optional

from .controlplane import FunctionSpec, ScaleMechanism
from .netmodel import ComputeParams, PathParams
from .sched import SchedulerConfig
from .simcore import Dist


@dataclass
class WorkloadSpec:
    mode: str = "sequential"  # sequential | open-loop
    count: int = 100
    rates: list[float] = field(default_factory=lambda: [
        1000, 2000, 4000, 6000, 8000, 10000, 14000, 20000,
        28000, 40000, 56000, 72000])
    duration_us: int = 200_000
    payload_bytes: int = 600
    warmup_frac: float = 0.1

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.payload_bytes < 0:
            raise ValueError("payload_bytes must be >= 0")
        if any(b <= a for a, b in zip(self.rates, self.rates[1:])):
            raise ValueError("rates must be strictly increasing")


@dataclass
class RunConfig:
    seed: int = 42
    path_params: PathParams = field(default_factory=PathParams)
    compute_params: ComputeParams = field(default_factory=ComputeParams)
    sched: SchedulerConfig = field(default_factory=SchedulerConfig)
    container_cores: int = 2
    container_startup_us: int = 250_000
    queue_cap: int = 1024
    max_instances: int = 64
    function_name: str = "aes"
    base_service_us: float = 120.0
    service_sigma: float = 0.25
    max_cores: int = 8
    scale_mechanism: ScaleMechanism = ScaleMechanism.MULTI_PROCESS
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)

    def function_spec(self, backend=None) -> FunctionSpec:
        return FunctionSpec(name=self.function_name,
                            base_service_us=self.base_service_us,
                            max_cores=self.max_cores,
                            scale_mechanism=self.scale_mechanism,
                            backend=backend,
                            service_sigma=self.service_sigma)

    def with_params(self, path_params: Optional[PathParams] = None,
                    compute_params: Optional[ComputeParams] = None) -> "RunConfig":
        out = replace(self)
        if path_params is not None:
            out = replace(out, path_params=path_params)
        if compute_params is not None:
            out = replace(out, compute_params=compute_params)
        return out

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "path_params": self.path_params.to_dict(),
            "compute_params": self.compute_params.to_dict(),
            "scheduler": {
                "total_cores": self.sched.total_cores,
                "reserved": self.sched.reserved,
                "timeslice_us": self.sched.timeslice_us,
                "tick_us": self.sched.tick_us,
            },
            "container_cores": self.container_cores,
            "container_startup_us": self.container_startup_us,
            "queue_cap": self.queue_cap,
            "max_instances": self.max_instances,
            "function": {
                "name": self.function_name,
                "base_service_us": self.base_service_us,
                "service_sigma": self.service_sigma,
                "max_cores": self.max_cores,
                "scale_mechanism": self.scale_mechanism.value,
            },
            "workload": {
                "mode": self.workload.mode,
                "count": self.workload.count,
                "rates": self.workload.rates,
                "duration_us": self.workload.duration_us,
                "payload_bytes": self.workload.payload_bytes,
                "warmup_frac": self.workload.warmup_frac,
            },
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        cfg = RunConfig()
        if "seed" in d:
            cfg.seed = int(d["seed"])
        if "path_params" in d:
            cfg.path_params = PathParams(**d["path_params"])
        if "compute_params" in d:
            cp = d["compute_params"]
            cfg.compute_params = ComputeParams(
                mux_overhead_factor=cp.get("mux_overhead_factor", 1.546),
                jitter_dist=Dist.from_dict(cp["jitter_dist"]) if "jitter_dist" in cp
                else ComputeParams().jitter_dist)
        if "scheduler" in d:
            cfg.sched = SchedulerConfig(**d["scheduler"])
        for key in ("container_cores", "container_startup_us", "queue_cap",
                    "max_instances"):
            if key in d:
                setattr(cfg, key, int(d[key]))
        if "function" in d:
            fn = d["function"]
            cfg.function_name = fn.get("name", cfg.function_name)
            cfg.base_service_us = float(fn.get("base_service_us", cfg.base_service_us))
            cfg.service_sigma = float(fn.get("service_sigma", cfg.service_sigma))
            cfg.max_cores = int(fn.get("max_cores", cfg.max_cores))
            if "scale_mechanism" in fn:
                cfg.scale_mechanism = ScaleMechanism(fn["scale_mechanism"])
        if "workload" in d:
            wl = d["workload"]
            cfg.workload = WorkloadSpec(
                mode=wl.get("mode", "sequential"),
                count=int(wl.get("count", 100)),
                rates=[float(r) for r in wl.get("rates", WorkloadSpec().rates)],
                duration_us=int(wl.get("duration_us", 200_000)),
                payload_bytes=int(wl.get("payload_bytes", 600)),
                warmup_frac=float(wl.get("warmup_frac", 0.1)))
        return cfg

    @staticmethod
    def from_json(path: str) -> "RunConfig":
        with open(path) as f:
            return RunConfig.from_dict(json.load(f))


def zero_overhead_config(seed: int = 42) -> RunConfig:
    """Config where both backends coincide: all overhead terms off, constant
    service time, and a 1 us scheduler tick (no wakeup skew on integer
    timestamps)."""
    from .netmodel import ZERO_COMPUTE_PARAMS, ZERO_PATH_PARAMS
    cfg = RunConfig(seed=seed)
    cfg.path_params = PathParams(wire_cost=5.0, trap_cost=0.0, interrupt_cost=0.0,
                                 ctx_switch_cost=0.0, poll_dispatch_cost=0.0,
                                 copy_cost_per_kb=0.3)
    cfg.compute_params = ZERO_COMPUTE_PARAMS
    cfg.sched = SchedulerConfig(tick_us=1, timeslice_us=100)
    cfg.container_cores = cfg.max_cores
    cfg.container_startup_us = 3400  # align init so timestamps coincide
    return cfg
