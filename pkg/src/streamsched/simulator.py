"""Fluid discrete-time simulation of topologies sharing a cluster.

One tick moves every active topology forward by ``SimConfig.tick`` seconds.
Spouts emit their profile rate; every bolt pulls from per-parent queues
with shuffle grouping across its executors (each executor is offered an
equal share of the backlog and runs at its own jittered, CPU-throttled
rate); executed tuples are multiplied by selectivity and routed to children
by edge share.  Overflow beyond a queue's capacity is dropped and counted.

All counters land in a per-topology :class:`SlidingWindow`, from which the
same metrics the scheduler consumes (juice, capacity, latency) are derived.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from . import utility as util
from .juice import topology_juice
from .metrics import (
    EdgeWindowCounters,
    ExecutorWindowCounters,
    InsufficientData,
    SlidingWindow,
    TopologyMetrics,
    executor_capacity,
    operator_capacity,
)
from .scheduler import ClusterSnapshot, NodeLoad, SchedulerAction, TopologyState
from .topology import OperatorSpec, TopologySpec, sinks, topological_order, validate
from .workload import RateProfile, constant, rate_at

log = logging.getLogger(__name__)

DEFAULT_QUEUE_CAPACITY = 100_000


@dataclass(frozen=True)
class NodeSpec:
    id: str
    cores: int = 8
    # runnable processes from outside the simulated topologies
    background_load: float = 0.0

    def __post_init__(self) -> None:
        if self.cores < 1:
            raise ValueError(f"node {self.id}: cores must be >= 1")


@dataclass(frozen=True)
class SimConfig:
    tick: float = 1.0
    seed: int = 0
    jitter_pct: float = 5.0
    queue_capacity: float = DEFAULT_QUEUE_CAPACITY
    executor_cap: Optional[int] = None
    cpu_contention: bool = True
    sub_windows: int = 6
    sub_window_len: float = 10.0

    def __post_init__(self) -> None:
        ratio = self.sub_window_len / self.tick
        if not self.tick > 0 or abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("tick must divide the sub-window length")


@dataclass
class OperatorRuntime:
    spec: OperatorSpec
    executor_count: int
    queue_capacity: float
    queues: dict = field(default_factory=dict)  # parent id -> backlog
    nodes: list = field(default_factory=list)  # node index per executor
    dropped: float = 0.0
    service_multiplier: float = 1.0

    @property
    def queue_len(self) -> float:
        return float(sum(self.queues.values()))

    @property
    def service_time(self) -> float:
        return self.spec.service_time * self.service_multiplier


@dataclass
class TopologyRuntime:
    spec: TopologySpec
    operators: dict
    window: SlidingWindow
    profiles: dict  # spout id -> RateProfile
    order: list
    sink_ids: list
    active: bool = True

    @property
    def id(self) -> str:
        return self.spec.id

    def executors(self) -> dict[str, int]:
        return {op: rt.executor_count for op, rt in sorted(self.operators.items())}


@dataclass(frozen=True)
class TraceRow:
    time: float
    topology: str
    operator: str
    queue_len: float
    executed: float
    dropped: float


Hook = Callable[["World"], None]


class World:
    """Single-owner simulation state; advance with :meth:`tick`."""

    def __init__(
        self,
        nodes: Sequence[NodeSpec],
        config: SimConfig = SimConfig(),
        hooks: Iterable[Hook] = (),
        trace: bool = False,
    ):
        if not nodes:
            raise ValueError("cluster needs at least one node")
        self.nodes = list(nodes)
        self.config = config
        self.time = 0.0
        self.topologies: dict[str, TopologyRuntime] = {}
        self.hooks = list(hooks)
        self.faults: list[tuple[float, float]] = []
        self.trace_rows: Optional[list[TraceRow]] = [] if trace else None
        self._rng = np.random.default_rng(config.seed)
        self._rr = 0
        self._throttle = np.ones(len(self.nodes))
        self._node_load = np.array([n.background_load for n in self.nodes], dtype=float)
        self._load_acc = np.zeros(len(self.nodes))
        self._load_ticks = 0
        self._last_load = self._node_load.copy()

    # -- construction ---------------------------------------------------------

    def add_topology(
        self,
        spec: TopologySpec,
        profiles: Optional[Mapping[str, RateProfile]] = None,
        queue_capacity: Optional[float] = None,
        active: bool = True,
    ) -> TopologyRuntime:
        report = validate(spec)
        if report:
            raise ValueError(f"invalid topology {spec.id}: " + "; ".join(map(str, report)))
        if spec.id in self.topologies:
            raise ValueError(f"duplicate topology {spec.id}")
        cap = self.config.queue_capacity if queue_capacity is None else queue_capacity
        operators = {}
        for op in spec.operators:
            rt = OperatorRuntime(op, op.parallelism, cap)
            rt.queues = {e.src: 0.0 for e in spec.parents(op.id)}
            for _ in range(op.parallelism):
                rt.nodes.append(self._rr % len(self.nodes))
                self._rr += 1
            operators[op.id] = rt
        chosen = {s: constant(spec.input_rate) for s in spec.spouts()}
        for spout, profile in (profiles or {}).items():
            if spout not in chosen:
                raise ValueError(f"{spec.id}: workload bound to unknown spout {spout}")
            chosen[spout] = profile
        topo = TopologyRuntime(
            spec=spec,
            operators=operators,
            window=SlidingWindow(self.config.sub_windows, self.config.sub_window_len),
            profiles=chosen,
            order=topological_order(spec),
            sink_ids=sinks(spec),
            active=active,
        )
        self.topologies[spec.id] = topo
        return topo

    def set_active(self, topology_id: str, active: bool) -> None:
        topo = self.topologies[topology_id]
        if topo.active != active:
            topo.active = active
            topo.window.reset()
            for rt in topo.operators.values():
                rt.queues = {k: 0.0 for k in rt.queues}

    def active_topologies(self) -> list[TopologyRuntime]:
        return [t for _, t in sorted(self.topologies.items()) if t.active]

    # -- faults ---------------------------------------------------------------

    def inject_fault(self, start: float, end: float) -> None:
        """Cut the scheduler off from metrics during [start, end).

        Data counts as fresh again one full sliding window after ``end``.
        """
        if end > start:
            self.faults.append((start, end))

    @property
    def window_span(self) -> float:
        return self.config.sub_windows * self.config.sub_window_len

    def data_fresh_at(self, t: float) -> bool:
        return not any(start <= t < end + self.window_span for start, end in self.faults)

    # -- dynamics -------------------------------------------------------------

    def tick(self) -> None:
        for hook in self.hooks:
            hook(self)
        dt = self.config.tick
        demand = np.array([n.background_load for n in self.nodes], dtype=float)
        for topo in self.active_topologies():
            self._tick_topology(topo, dt, demand)
        for topo in self.active_topologies():
            topo.window.advance(dt)
        self._node_load = demand
        if self.config.cpu_contention:
            cores = np.array([n.cores for n in self.nodes], dtype=float)
            self._throttle = np.minimum(1.0, cores / np.maximum(demand, 1e-12))
        self._load_acc += demand
        self._load_ticks += 1
        self.time += dt
        if abs(self.time / self.config.sub_window_len - round(self.time / self.config.sub_window_len)) < 1e-9:
            self._last_load = self._load_acc / self._load_ticks
            self._load_acc = np.zeros(len(self.nodes))
            self._load_ticks = 0

    def _tick_topology(self, topo: TopologyRuntime, dt: float, demand: np.ndarray) -> None:
        w = topo.window
        jitter = self.config.jitter_pct / 100.0
        emitted: dict[str, float] = {}
        delay: dict[str, float] = {}  # ms spent at each operator this tick
        inbound: dict[str, float] = {}  # mean ms already spent by tuples arriving at op
        for op_id in topo.order:
            rt = topo.operators[op_id]
            spec = rt.spec
            n = rt.executor_count
            nodes = np.asarray(rt.nodes)
            throttle = self._throttle[nodes]
            service = rt.service_time
            if jitter > 0:
                factors = self._rng.uniform(1.0 - jitter, 1.0 + jitter, n)
            else:
                factors = np.ones(n)
            if service > 0:
                per_exec = factors * throttle * (1000.0 / service) * dt
                nominal = float(np.sum(throttle)) * (1000.0 / service) * dt
            else:
                per_exec = np.full(n, np.inf)
                nominal = np.inf

            if spec.is_spout:
                generated = rate_at(topo.profiles[op_id], self.time) * dt
                offered = np.full(n, generated / n)
                executed_e = offered
                executed = generated
                by_parent: dict[str, float] = {}
                backlog_after = 0.0
                w.add(("input",), generated)
                inbound[op_id] = 0.0
            else:
                arrivals = {e.src: emitted[e.src] * e.share for e in topo.spec.parents(op_id)}
                available = {p: rt.queues[p] + arrivals[p] for p in rt.queues}
                total_avail = sum(available.values())
                offered = np.full(n, total_avail / n)
                executed_e = np.minimum(offered, per_exec)
                executed = float(np.sum(executed_e))
                frac = executed / total_avail if total_avail > 0 else 0.0
                by_parent = {p: a * frac for p, a in available.items()}
                leftover = {p: available[p] - by_parent[p] for p in available}
                backlog = sum(leftover.values())
                dropped = 0.0
                if backlog > rt.queue_capacity:
                    keep = rt.queue_capacity / backlog
                    dropped = backlog - rt.queue_capacity
                    leftover = {p: v * keep for p, v in leftover.items()}
                rt.queues = leftover
                rt.dropped += dropped
                backlog_after = sum(leftover.values())
                for p, e in by_parent.items():
                    w.add(("exec", p, op_id), e)
                w.add(("dropped", op_id), dropped)
                weight = sum(by_parent.values())
                if weight > 0:
                    inbound[op_id] = sum(
                        by_parent[p] * (inbound[p] + delay[p]) for p in by_parent
                    ) / weight
                else:
                    inbound[op_id] = sum(
                        arrivals[p] * (inbound[p] + delay[p]) for p in arrivals
                    ) / max(sum(arrivals.values()), 1e-12)

            busy_ms = np.where(
                executed_e > 0, executed_e * service / np.maximum(factors * throttle, 1e-12), 0.0
            )
            w.add(("exec_tuples", op_id), executed_e)
            w.add(("busy_ms", op_id), busy_ms)
            wanted = np.minimum(offered * service / np.maximum(factors, 1e-12), dt * 1000.0)
            np.add.at(demand, nodes, wanted / (dt * 1000.0))

            queue_ms = 0.0 if backlog_after <= 0 else backlog_after / nominal * dt * 1000.0
            mean_throttle = float(np.mean(throttle))
            delay[op_id] = queue_ms + service / mean_throttle + spec.state_overhead
            out = executed * spec.selectivity
            emitted[op_id] = out
            w.add(("sent", op_id), out)
            if op_id in topo.sink_ids:
                w.add(("output",), out)
                w.add_latency(("latency",), inbound[op_id] + delay[op_id], executed)
            if self.trace_rows is not None:
                self.trace_rows.append(
                    TraceRow(self.time, topo.id, op_id, backlog_after, executed,
                             0.0 if spec.is_spout else dropped)
                )

    # -- scheduler interface --------------------------------------------------

    def apply_action(self, action: SchedulerAction) -> SchedulerAction:
        """Apply executor deltas; returns the action as actually applied."""
        applied: dict[str, dict[str, int]] = {}
        budget = None
        if self.config.executor_cap is not None:
            budget = self.config.executor_cap - self.total_executors()
        for tid in sorted(action.deltas):
            topo = self.topologies.get(tid)
            if topo is None:
                log.warning("action names unknown topology %s", tid)
                continue
            for op_id, delta in sorted(action.deltas[tid].items()):
                rt = topo.operators[op_id]
                if delta > 0 and budget is not None:
                    if delta > budget:
                        log.warning(
                            "executor cap truncates %s/%s from +%d to +%d",
                            tid, op_id, delta, max(budget, 0),
                        )
                        delta = max(budget, 0)
                    budget -= delta
                target = max(1, rt.executor_count + delta)
                real = target - rt.executor_count
                if real == 0:
                    continue
                self._resize(rt, target)
                applied.setdefault(tid, {})[op_id] = real
            if tid in applied:
                topo.window.reset()
        return SchedulerAction(action.kind, action.target, applied, action.reason)

    def set_executors(self, topology_id: str, counts: Mapping[str, int]) -> None:
        topo = self.topologies[topology_id]
        for op_id, n in counts.items():
            self._resize(topo.operators[op_id], max(1, int(n)))
        topo.window.reset()

    def _resize(self, rt: OperatorRuntime, target: int) -> None:
        while rt.executor_count < target:
            counts = self._executors_per_node()
            node = min(
                range(len(self.nodes)), key=lambda i: (counts[i] / self.nodes[i].cores, i)
            )
            rt.nodes.append(node)
            rt.executor_count += 1
        while rt.executor_count > target:
            rt.nodes.pop()
            rt.executor_count -= 1

    def _executors_per_node(self) -> list[int]:
        counts = [0] * len(self.nodes)
        for topo in self.topologies.values():
            if not topo.active:
                continue
            for rt in topo.operators.values():
                for i in rt.nodes:
                    counts[i] += 1
        return counts

    def total_executors(self) -> int:
        return sum(
            rt.executor_count
            for t in self.topologies.values()
            if t.active
            for rt in t.operators.values()
        )

    def configuration(self) -> dict[str, dict[str, int]]:
        return {t.id: t.executors() for t in self.active_topologies()}

    def node_loads(self) -> tuple[NodeLoad, ...]:
        """CPU load averaged over the last complete sub-window."""
        return tuple(
            NodeLoad(n.cores, float(self._last_load[i]), n.id) for i, n in enumerate(self.nodes)
        )

    # -- metrics ----------------------------------------------------------------

    def topology_metrics(self, topology_id: str) -> TopologyMetrics:
        topo = self.topologies[topology_id]
        agg = topo.window.aggregate()
        spec = topo.spec
        counters = {
            (e.src, e.dst): EdgeWindowCounters(
                sent=agg.count(("sent", e.src), 0.0),
                executed=agg.count(("exec", e.src, e.dst), 0.0),
            )
            for e in spec.edges
        }
        juice = topology_juice(spec, counters).topology_juice
        window_ms = agg.span_s * 1000.0
        capacities = {}
        for op_id, rt in sorted(topo.operators.items()):
            executed = np.asarray(agg.count(("exec_tuples", op_id), 0.0), dtype=float)
            busy = np.asarray(agg.count(("busy_ms", op_id), 0.0), dtype=float)
            executed = np.broadcast_to(executed, (rt.executor_count,))
            busy = np.broadcast_to(busy, (rt.executor_count,))
            caps = [
                executor_capacity(
                    ExecutorWindowCounters(float(x), float(b / x) if x > 0 else 0.0, window_ms)
                )
                for x, b in zip(executed, busy)
            ]
            capacities[op_id] = operator_capacity(caps)
        try:
            latency = agg.mean_latency(("latency",))
        except InsufficientData:
            latency = None
        return TopologyMetrics(
            latency=latency,
            juice=juice,
            input_rate=agg.rate(("input",)),
            output_rate=agg.rate(("output",)),
            per_operator_capacity=capacities,
        )

    def topology_utility(self, topology_id: str, metrics: TopologyMetrics) -> util.UtilityValue:
        slo = self.topologies[topology_id].spec.slo
        if metrics.latency is None and slo.kind is not util.SloKind.THROUGHPUT:
            # nothing reached a sink: no latency to credit
            return util.UtilityValue(0.0, slo.max_utility)
        return util.evaluate(slo, metrics.latency, metrics.juice)

    def snapshot(self) -> ClusterSnapshot:
        fresh = self.data_fresh_at(self.time)
        states = {}
        for topo in self.active_topologies():
            try:
                m = self.topology_metrics(topo.id)
            except InsufficientData:
                fresh = False
                m = TopologyMetrics(None, None, 0.0, 0.0, {})
                u = util.UtilityValue(0.0, topo.spec.slo.max_utility)
            else:
                u = self.topology_utility(topo.id, m)
            states[topo.id] = TopologyState(
                metrics=m,
                utility=u,
                executors=topo.executors(),
                spouts=frozenset(topo.spec.spouts()),
            )
        return ClusterSnapshot(self.time, states, self.node_loads(), fresh)


def tuple_latency_estimate(
    chain: Sequence[tuple[float, float, float, float]],
) -> float:
    """Mean end-to-end latency (ms) along one path.

    Each element is ``(queue_len, drain_rate_per_s, service_ms, state_overhead_ms)``.
    """
    if not chain:
        raise InsufficientData("empty path")
    total = 0.0
    for queue_len, drain, service, overhead in chain:
        if queue_len > 0:
            if not drain > 0:
                raise InsufficientData("queued tuples but nothing drains them")
            total += queue_len / drain * 1000.0
        total += service + overhead
    return total
