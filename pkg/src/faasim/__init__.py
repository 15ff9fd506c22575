"""Deterministic discrete-event simulator of a single-server FaaS platform,
comparing a kernel-network-stack backend against a kernel-bypass backend."""

from .config import RunConfig, WorkloadSpec, zero_overhead_config
from .controlplane import (FunctionSpec, InvocationRecord, Platform,
                           ReplicaRecord, ScaleMechanism)
from .instances import ContainerInstance, BypassInstance, SimContext
from .netmodel import (ComputeParams, PathKind, PathParams, one_way_packet_cost,
                       rpc_cost, service_time)
from .sched import (CoreScheduler, InstanceSignals, SchedulerConfig,
                    allocate_cores)
from .simcore import Dist, Engine, RngRegistry, RngStream

__all__ = [
    "RunConfig", "WorkloadSpec", "zero_overhead_config",
    "FunctionSpec", "InvocationRecord", "Platform", "ReplicaRecord",
    "ScaleMechanism", "ContainerInstance", "BypassInstance", "SimContext",
    "ComputeParams", "PathKind", "PathParams", "one_way_packet_cost",
    "rpc_cost", "service_time", "CoreScheduler", "InstanceSignals",
    "SchedulerConfig", "allocate_cores", "Dist", "Engine", "RngRegistry",
    "RngStream",
]

__version__ = "0.1.0"
