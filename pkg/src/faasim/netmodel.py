"""Per-RPC and per-packet latency models for the two network paths.

The kernel path pays syscall traps, interrupt-driven receives, and context
switches per packet; the bypass path pays only a polled dequeue. The compute
side of the kernel path is penalised by a thread-multiplexing factor plus an
additive heavy-tailed jitter term; the bypass path charges base service time
unmodified.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .simcore import Dist, RngStream


class PathKind(Enum):
    KERNEL_STACK = "kernel"
    BYPASS = "bypass"


@dataclass(frozen=True)
class PathParams:
    """Per-hop cost decomposition, all in microseconds."""
    wire_cost: float = 5.0
    trap_cost: float = 0.5
    interrupt_cost: float = 2.0
    ctx_switch_cost: float = 3.0
    poll_dispatch_cost: float = 0.2
    copy_cost_per_kb: float = 0.3

    def __post_init__(self) -> None:
        for name in ("wire_cost", "trap_cost", "interrupt_cost", "ctx_switch_cost",
                     "poll_dispatch_cost", "copy_cost_per_kb"):
            if getattr(self, name) < 0:
                raise ValueError(f"PathParams.{name} must be >= 0")

    def replace(self, **kw) -> "PathParams":
        from dataclasses import replace
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "wire_cost": self.wire_cost,
            "trap_cost": self.trap_cost,
            "interrupt_cost": self.interrupt_cost,
            "ctx_switch_cost": self.ctx_switch_cost,
            "poll_dispatch_cost": self.poll_dispatch_cost,
            "copy_cost_per_kb": self.copy_cost_per_kb,
        }


@dataclass(frozen=True)
class ComputeParams:
    """Kernel-path compute penalty: multiplicative factor plus additive jitter.

    Bypass execution always charges the base service time (factor 1, no
    jitter). The jitter default is a heavy-tailed lognormal whose scale is
    fitted during calibration; its small median leaves the median execution
    penalty to the factor while the tail drives p99.
    """
    mux_overhead_factor: float = 1.546
    jitter_dist: Dist = field(default_factory=lambda: Dist.lognormal(10.0, 1.8))

    def __post_init__(self) -> None:
        if self.mux_overhead_factor < 1.0:
            raise ValueError("mux_overhead_factor must be >= 1")

    def replace(self, **kw) -> "ComputeParams":
        from dataclasses import replace
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "mux_overhead_factor": self.mux_overhead_factor,
            "jitter_dist": self.jitter_dist.to_dict(),
        }


def one_way_packet_cost(kind: PathKind, payload_bytes: int, params: PathParams) -> float:
    """Latency of one packet traversal in microseconds (deterministic)."""
    if payload_bytes < 0:
        raise ValueError(f"payload_bytes must be >= 0, got {payload_bytes}")
    copy = params.copy_cost_per_kb * (payload_bytes / 1024.0)
    if kind is PathKind.KERNEL_STACK:
        return params.wire_cost + params.trap_cost + params.interrupt_cost \
            + params.ctx_switch_cost + copy
    return params.wire_cost + params.poll_dispatch_cost + copy


def rpc_cost(kind: PathKind, req_bytes: int, resp_bytes: int, params: PathParams) -> float:
    """Round-trip cost of one RPC leg; handler compute is charged elsewhere."""
    return one_way_packet_cost(kind, req_bytes, params) \
        + one_way_packet_cost(kind, resp_bytes, params)


def service_time(kind: PathKind, base: float, cparams: ComputeParams,
                 rng: RngStream) -> float:
    """Execution time for one request given the backend's compute model."""
    if base < 0:
        raise ValueError(f"base service time must be >= 0, got {base}")
    if kind is PathKind.BYPASS:
        return base
    return base * cparams.mux_overhead_factor + rng.draw(cparams.jitter_dist)


ZERO_PATH_PARAMS = PathParams(wire_cost=0.0, trap_cost=0.0, interrupt_cost=0.0,
                              ctx_switch_cost=0.0, poll_dispatch_cost=0.0,
                              copy_cost_per_kb=0.0)

ZERO_COMPUTE_PARAMS = ComputeParams(mux_overhead_factor=1.0,
                                    jitter_dist=Dist.constant(0.0))
