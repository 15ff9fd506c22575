"""Load generators and experiment drivers: sequential closed loop, open-loop
Poisson sweep, and cold-start timing.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .config import RunConfig
from .controlplane import InvocationRecord, Platform
from .instances import SimContext
from .netmodel import PathKind
from .sched import CoreScheduler
from .simcore import Dist, Engine, RngRegistry, round_us


@dataclass
class SweepPoint:
    rate_rps: float
    p50_us: int
    p99_us: int
    reject_frac: float
    saturated: bool

    def csv_row(self) -> str:
        return (f"{self.rate_rps:g},{self.p50_us},{self.p99_us},"
                f"{self.reject_frac:.6f}")


@dataclass
class Sim:
    engine: Engine
    platform: Platform
    rngs: RngRegistry


def build_sim(cfg: RunConfig, kind: PathKind, stream_tag: str = "") -> Sim:
    """Assemble engine, scheduler, and platform for one backend."""
    engine = Engine()
    rngs = RngRegistry(cfg.seed)
    scheduler = CoreScheduler(engine, cfg.sched)
    ctx = SimContext(
        engine=engine,
        kind=kind,
        path_params=cfg.path_params,
        compute_params=cfg.compute_params,
        rng_service=rngs.stream("service" + stream_tag),
        rng_jitter=rngs.stream("jitter" + stream_tag),
        queue_cap=cfg.queue_cap,
        scheduler=scheduler,
    )
    platform = Platform(ctx, container_cores=cfg.container_cores,
                        container_startup_us=cfg.container_startup_us,
                        max_instances=cfg.max_instances)
    return Sim(engine=engine, platform=platform, rngs=rngs)


def deploy_and_warm(sim: Sim, cfg: RunConfig, kind: PathKind) -> int:
    """Deploy the workload function and run past its init; returns ready time."""
    sim.platform.deploy_function(cfg.function_spec(backend=kind))
    ready = sim.platform.ready_time(cfg.function_name)
    sim.engine.run_until(ready)
    return ready


def run_sequential(cfg: RunConfig, kind: PathKind, count: Optional[int] = None,
                   start_t: Optional[int] = None, sim: Optional[Sim] = None
                   ) -> list[InvocationRecord]:
    """Closed loop: invocation i+1 is issued only after i completes."""
    n = count if count is not None else cfg.workload.count
    if sim is None:
        sim = build_sim(cfg, kind)
        deploy_and_warm(sim, cfg, kind)
    t0 = start_t if start_t is not None else sim.engine.now
    payload = cfg.workload.payload_bytes
    records: list[InvocationRecord] = []

    def issue(at: int) -> None:
        def done(rec: InvocationRecord) -> None:
            records.append(rec)
            if len(records) < n:
                issue(rec.complete_t)
        sim.platform.submit(cfg.function_name, at, req_bytes=payload,
                            resp_bytes=payload, on_complete=done)

    issue(t0)
    sim.engine.run_until_idle(hard_limit=t0 + 3_600_000_000)
    assert len(records) == n
    return records


def run_sequential_with_sim(cfg: RunConfig, kind: PathKind
                            ) -> tuple[list[InvocationRecord], Sim]:
    sim = build_sim(cfg, kind)
    deploy_and_warm(sim, cfg, kind)
    recs = run_sequential(cfg, kind, sim=sim)
    return recs, sim


def poisson_arrival_times(rng, rate_rps: float, duration_us: int, t0: int) -> list[int]:
    """Open-loop arrival schedule: exponential inter-arrivals at rate_rps."""
    rate_per_us = rate_rps / 1e6
    dist = Dist.exponential(rate=rate_per_us)
    times: list[int] = []
    t = float(t0)
    while True:
        t += rng.draw(dist)
        ti = round_us(t)
        if ti >= t0 + duration_us:
            break
        times.append(max(ti, t0))
    return times


def zero_load_p50(cfg: RunConfig, kind: PathKind) -> int:
    """Median latency of a single uncontended invocation."""
    from .metrics import percentile
    recs = run_sequential(cfg, kind, count=9)
    return percentile([r.e2e_us for r in recs if r.status == "ok"], 50)


def run_open_loop(cfg: RunConfig, kind: PathKind,
                  rates: Optional[list[float]] = None) -> list[SweepPoint]:
    """Offered-load sweep with Poisson arrivals; each rate is an independent
    simulation sharing the same root seed."""
    from .metrics import percentile
    wl = cfg.workload
    rates = rates if rates is not None else wl.rates
    baseline_p50 = zero_load_p50(cfg, kind)
    points: list[SweepPoint] = []
    for rate in rates:
        sim = build_sim(cfg, kind)
        ready = deploy_and_warm(sim, cfg, kind)
        t0 = ready
        arrivals = poisson_arrival_times(sim.rngs.stream("arrivals"), rate,
                                         wl.duration_us, t0)
        for at in arrivals:
            sim.platform.submit(cfg.function_name, at,
                                req_bytes=wl.payload_bytes,
                                resp_bytes=wl.payload_bytes)
        sim.engine.run_until_idle(hard_limit=t0 + wl.duration_us + 60_000_000)
        cutoff = t0 + int(wl.warmup_frac * wl.duration_us)
        post = [r for r in sim.platform.records if r.submit_t >= cutoff]
        ok = [r.e2e_us for r in post if r.status == "ok"]
        n_rej = sum(1 for r in post if r.status == "overload-rejected")
        reject_frac = n_rej / len(post) if post else 0.0
        if ok:
            p50 = percentile(ok, 50)
            p99 = percentile(ok, 99)
        else:
            p50 = p99 = 0
        saturated = (reject_frac > 0.01
                     or (ok and p99 > 50 * baseline_p50)
                     or not ok)
        points.append(SweepPoint(rate_rps=rate, p50_us=p50, p99_us=p99,
                                 reject_frac=reject_frac, saturated=bool(saturated)))
    return points


def measure_cold_start(cfg: RunConfig, kind: PathKind, deploy_at: int = 0) -> int:
    """Time from deployment request to the instance-ready event."""
    sim = build_sim(cfg, kind)
    sim.engine.run_until(deploy_at)
    sim.platform.deploy_function(cfg.function_spec(backend=kind))
    ready = sim.platform.ready_time(cfg.function_name)
    sim.engine.run_until(ready)
    return ready - deploy_at
