import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faasim.config import RunConfig
from faasim.netmodel import PathKind
from faasim.sched import (InstanceSignals, SchedulerConfig, allocate_cores)
from faasim.simcore import ContractViolation
from faasim.workload import build_sim, deploy_and_warm


def sig(iid, demand, cap=None):
    cap = cap if cap is not None else max(demand, 1)
    return InstanceSignals(instance_id=iid, runnable_threads=demand,
                           eventq_pending=0, allocated=0, cap=cap)


def grants_of(demands, usable, caps=None):
    signals = [sig(i, d, caps[i] if caps else None) for i, d in enumerate(demands)]
    return allocate_cores(signals, usable)


def brute_force_maxmin(demands, usable):
    """Enumerate every maximal feasible allocation; return the best sorted
    grant multiset under ascending-lexicographic comparison."""
    n = len(demands)
    best = None

    def rec(i, remaining, acc):
        nonlocal best
        if i == n:
            if remaining == 0 or all(acc[j] >= demands[j] for j in range(n)):
                v = tuple(sorted(acc))
                if best is None or v > best:
                    best = v
            return
        for g in range(min(demands[i], remaining) + 1):
            rec(i + 1, remaining - g, acc + [g])

    rec(0, usable, [])
    return best


def progressive_fill(demands, usable):
    """Analytic max-min oracle: ascending-demand pass with equal shares."""
    n = len(demands)
    order = sorted(range(n), key=lambda i: demands[i])
    remaining = usable
    grants = [0] * n
    for pos, i in enumerate(order):
        share = remaining // (n - pos)
        grants[i] = min(demands[i], share)
        remaining -= grants[i]
    return tuple(sorted(grants))


def test_demand_bounded_cores_idle():
    g = grants_of([1, 1], 4)
    assert g == {0: 1, 1: 1}


def test_tie_break_ascending_id():
    g = grants_of([2, 2, 2], 4, caps=[4, 4, 4])
    assert g == {0: 2, 1: 1, 2: 1}
    assert tuple(sorted(g.values())) == brute_force_maxmin([2, 2, 2], 4)


def test_cap_binds_before_budget():
    signals = [InstanceSignals(0, runnable_threads=5, eventq_pending=0,
                               allocated=0, cap=3)]
    assert allocate_cores(signals, 4) == {0: 3}


def test_empty_signals():
    assert allocate_cores([], 8) == {}


def test_demand_formula():
    s = InstanceSignals(0, runnable_threads=0, eventq_pending=3, allocated=0, cap=4)
    assert s.demand() == 1
    s = InstanceSignals(0, runnable_threads=6, eventq_pending=1, allocated=0, cap=4)
    assert s.demand() == 4
    s = InstanceSignals(0, runnable_threads=2, eventq_pending=0, allocated=0, cap=4)
    assert s.demand() == 2


def test_brute_force_small_exhaustive():
    for n in range(1, 4):
        for demands in itertools.product(range(4), repeat=n):
            for usable in range(7):
                got = tuple(sorted(grants_of(list(demands), usable).values()))
                assert got == brute_force_maxmin(list(demands), usable), \
                    (demands, usable)


def test_analytic_oracle_matches_brute_force():
    for n in range(1, 5):
        for demands in itertools.product(range(5), repeat=n):
            for usable in range(0, 9, 2):
                assert progressive_fill(list(demands), usable) == \
                    brute_force_maxmin(list(demands), usable), (demands, usable)


@given(st.lists(st.integers(min_value=0, max_value=8), min_size=1, max_size=6),
       st.integers(min_value=0, max_value=12))
@settings(max_examples=300)
def test_allocation_invariants(demands, usable):
    g = grants_of(demands, usable)
    total = sum(g.values())
    assert total <= usable
    for i, d in enumerate(demands):
        assert 0 <= g[i] <= d
    # work conservation: unmet demand implies exhausted budget
    if any(g[i] < d for i, d in enumerate(demands)):
        assert total == usable or all(g[i] == d for i, d in enumerate(demands))


def test_allocation_pure_function():
    demands = [3, 1, 4, 1, 5]
    assert grants_of(demands, 9) == grants_of(demands, 9)


def test_scheduler_config_validation():
    with pytest.raises(ValueError):
        SchedulerConfig(total_cores=1, reserved=1)
    with pytest.raises(ValueError):
        SchedulerConfig(timeslice_us=1, tick_us=5)
    assert SchedulerConfig().usable == 9


class TestTicking:
    def _sim(self, cfg=None):
        cfg = cfg or RunConfig(service_sigma=0.0)
        sim = build_sim(cfg, PathKind.BYPASS)
        deploy_and_warm(sim, cfg, PathKind.BYPASS)
        return cfg, sim

    def test_idle_wakeup_within_tick(self):
        cfg, sim = self._sim()
        sched = sim.platform.ctx.scheduler
        t = sim.engine.now
        sim.platform.submit(cfg.function_name, t)
        sim.engine.run_until(t + cfg.sched.tick_us + 100)
        dep = sim.platform.manager.table[cfg.function_name]
        inst = dep.instances[0]
        assert inst.cores_granted >= 1

    def test_steady_state_no_preemptions(self):
        cfg, sim = self._sim()
        sched = sim.platform.ctx.scheduler
        before = sched.preemption_count
        sched.tick(sim.engine.now)
        sched.tick(sim.engine.now)
        assert sched.preemption_count == before

    def test_signal_unknown_instance(self):
        _, sim = self._sim()
        with pytest.raises(ContractViolation):
            sim.platform.ctx.scheduler.signal_eventq(9999)

    def test_tick_ops_independent_of_idle_instances(self):
        # same 4 active instances; 10 vs 1000 idle registered instances
        ops = []
        for idle in (10, 1000):
            cfg = RunConfig(service_sigma=0.0, max_instances=idle + 8)
            sim = build_sim(cfg, PathKind.BYPASS)
            from faasim.controlplane import FunctionSpec, ScaleMechanism
            for i in range(idle):
                sim.platform.deploy_function(FunctionSpec(
                    name=f"idle{i}", base_service_us=100.0,
                    scale_mechanism=ScaleMechanism.NEW_INSTANCE,
                    backend=PathKind.BYPASS))
            for i in range(4):
                sim.platform.deploy_function(FunctionSpec(
                    name=f"act{i}", base_service_us=100.0,
                    backend=PathKind.BYPASS))
            sim.engine.run_until(4000)
            t = sim.engine.now
            for i in range(4):
                sim.platform.submit(f"act{i}", t)
            sched = sim.platform.ctx.scheduler
            sim.engine.run_until(t + 100)
            assert sched.last_allocation is not None
            ops.append(sched.last_allocation.tick_ops)
        assert ops[0] == ops[1]

    def test_preemption_and_regrant(self):
        # A holds 3 cores, drops to demand 1 while B needs cores
        cfg = RunConfig(service_sigma=0.0, max_cores=6)
        sim = build_sim(cfg, PathKind.BYPASS)
        from faasim.controlplane import FunctionSpec
        sim.platform.deploy_function(FunctionSpec("a", 5000.0, max_cores=6,
                                                  backend=PathKind.BYPASS))
        sim.platform.deploy_function(FunctionSpec("b", 5000.0, max_cores=6,
                                                  backend=PathKind.BYPASS))
        sim.engine.run_until(4000)
        t = sim.engine.now
        for _ in range(3):
            sim.platform.submit("a", t)
        sim.engine.run_until(t + 50)
        inst_a = sim.platform.manager.table["a"].instances[0]
        # 3 runnable plus the event-queue wakeup core
        assert 3 <= inst_a.cores_granted <= 4
        # B's burst arrives; A's finished work frees cores for B
        t2 = sim.engine.now
        for _ in range(6):
            sim.platform.submit("b", t2)
        sim.engine.run_until_idle(t2 + 60_000)
        inst_b = sim.platform.manager.table["b"].instances[0]
        assert sim.platform.completed_ok == 9
        sched = sim.platform.ctx.scheduler
        assert sched.preemption_count >= 1
