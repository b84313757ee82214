"""Cluster-wide scheduling state machine.

Each round the scheduler looks at one immutable :class:`ClusterSnapshot` and
returns exactly one :class:`SchedulerAction`:

* ``reconfigure`` grants executors to the congested operators of a single
  SLO-missing topology, chosen greedily by max utility;
* ``reduce`` shrinks uncongested operators of satisfied topologies when a
  reconfiguration lowered total utility on a congested cluster;
* ``revert`` restores the best configuration seen so far when reduction is
  not possible, and parks the cluster in the Converged state;
* ``converge`` marks the move into Converged once every job sits at max
  utility for a few stable rounds;
* ``wait`` covers everything else (stale data, quiescing, nothing to do).

All functions are pure; ``step`` returns fresh state objects.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

from .metrics import CONGESTION_THRESHOLD, TopologyMetrics, fmt
from .utility import UtilityValue

ACTION_COLUMNS = (
    "round",
    "time_s",
    "action_kind",
    "target",
    "deltas",
    "total_utility_before",
    "total_utility_after",
)


class ActionKind(str, enum.Enum):
    RECONFIGURE = "reconfigure"
    REDUCE = "reduce"
    REVERT = "revert"
    WAIT = "wait"
    CONVERGE = "converge"


class State(str, enum.Enum):
    NOT_CONVERGED = "NotConverged"
    CONVERGED = "Converged"


@dataclass(frozen=True)
class SchedulerConfig:
    round_s: float = 10.0
    quiesce_s: float = 60.0
    stable_rounds: int = 4
    capacity_threshold: float = CONGESTION_THRESHOLD
    executor_scale: float = 10.0
    reduction_keep: float = 0.2
    min_gain: float = 0.05
    blacklist_s: float = 3600.0
    converged_drop: float = 0.05
    drop_epsilon: float = 1e-6


DEFAULT_CONFIG = SchedulerConfig()


@dataclass(frozen=True)
class TopologyState:
    metrics: TopologyMetrics
    utility: UtilityValue
    executors: Mapping[str, int]
    spouts: frozenset = frozenset()


@dataclass(frozen=True)
class NodeLoad:
    cores: int
    cpu_load: float
    id: str = ""

    @property
    def congested(self) -> bool:
        return self.cpu_load > self.cores


@dataclass(frozen=True)
class ClusterSnapshot:
    time: float
    topologies: Mapping[str, TopologyState]
    nodes: tuple[NodeLoad, ...] = ()
    data_fresh: bool = True

    @property
    def total_utility(self) -> float:
        return sum(t.utility.current for t in self.topologies.values())

    @property
    def max_total_utility(self) -> float:
        return sum(t.utility.max for t in self.topologies.values())

    def configuration(self) -> dict[str, dict[str, int]]:
        return {tid: dict(t.executors) for tid, t in sorted(self.topologies.items())}


@dataclass(frozen=True)
class SchedulerAction:
    kind: ActionKind
    target: tuple[str, ...] = ()
    deltas: Mapping[str, Mapping[str, int]] = field(default_factory=dict)
    reason: str = ""

    def flat_deltas(self) -> str:
        """``topology/operator:delta`` pairs joined by semicolons."""
        return ";".join(
            f"{tid}/{op}:{d:+d}"
            for tid in sorted(self.deltas)
            for op, d in sorted(self.deltas[tid].items())
        )


def wait(reason: str) -> SchedulerAction:
    return SchedulerAction(ActionKind.WAIT, reason=reason)


@dataclass(frozen=True)
class HistoryEntry:
    configuration: Mapping[str, Mapping[str, int]]
    total_utility: float
    time: float


@dataclass(frozen=True)
class ConfigHistory:
    entries: tuple[HistoryEntry, ...] = ()
    reduction_done: frozenset = frozenset()
    blacklist: Mapping[str, float] = field(default_factory=dict)  # topology -> expiry s

    def record(self, snapshot: ClusterSnapshot) -> "ConfigHistory":
        entry = HistoryEntry(snapshot.configuration(), snapshot.total_utility, snapshot.time)
        return replace(self, entries=self.entries + (entry,))

    def mark_reduced(self, topology_ids: Sequence[str]) -> "ConfigHistory":
        return replace(self, reduction_done=self.reduction_done | frozenset(topology_ids))

    def blacklisted(self, topology_id: str, now: float) -> bool:
        return self.blacklist.get(topology_id, -math.inf) > now

    def with_blacklist(self, topology_id: str, expiry: float) -> "ConfigHistory":
        return replace(self, blacklist={**self.blacklist, topology_id: expiry})

    def best(self) -> Optional[HistoryEntry]:
        """Highest total utility; the most recent entry wins ties."""
        if not self.entries:
            return None
        return max(reversed(self.entries), key=lambda e: e.total_utility)


@dataclass(frozen=True)
class PendingAction:
    kind: ActionKind
    targets: tuple[str, ...]
    applied_at: float
    total_before: float
    target_before: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class MachineState:
    state: State = State.NOT_CONVERGED
    stable_rounds_remaining: Optional[int] = None
    last_best_utility: float = 0.0
    pending: Optional[PendingAction] = None


def round_half_up(x: float) -> int:
    # the epsilon absorbs representation error such as 0.6 / 0.3 == 1.9999999999999998
    return int(math.floor(x + 0.5 + 1e-9))


def select_target(
    snapshot: ClusterSnapshot,
    history: Optional[ConfigHistory] = None,
) -> Optional[str]:
    """Highest max utility among SLO-missing, non-blacklisted topologies.

    Ties go to the lower current utility, then to the lower id.
    """
    history = history or ConfigHistory()
    candidates = [
        (-t.utility.max, t.utility.current, tid)
        for tid, t in snapshot.topologies.items()
        if not t.utility.satisfied and not history.blacklisted(tid, snapshot.time)
    ]
    if not candidates:
        return None
    return min(candidates)[2]


def plan_reconfiguration(
    topology_id: str, state: TopologyState, config: SchedulerConfig = DEFAULT_CONFIG
) -> SchedulerAction:
    thr = config.capacity_threshold
    deltas = {}
    for op, cap in sorted(state.metrics.per_operator_capacity.items()):
        if cap > thr:
            deltas[op] = max(1, round_half_up((cap / thr - 1.0) * config.executor_scale))
    if not deltas:
        return wait(f"{topology_id} misses its SLO but has no operator above capacity {thr}")
    return SchedulerAction(ActionKind.RECONFIGURE, (topology_id,), {topology_id: deltas})


def cluster_congested(nodes: Sequence[NodeLoad]) -> bool:
    return sum(n.congested for n in nodes) * 2 > len(nodes)


def should_reduce(snapshot: ClusterSnapshot, history: ConfigHistory) -> bool:
    satisfied = [tid for tid, t in snapshot.topologies.items() if t.utility.satisfied]
    return (
        cluster_congested(snapshot.nodes)
        and bool(satisfied)
        and any(tid not in history.reduction_done for tid in satisfied)
    )


def plan_reduction(
    snapshot: ClusterSnapshot,
    history: ConfigHistory,
    config: SchedulerConfig = DEFAULT_CONFIG,
) -> SchedulerAction:
    targets = []
    deltas: dict[str, dict[str, int]] = {}
    for tid, t in sorted(snapshot.topologies.items()):
        if not t.utility.satisfied or tid in history.reduction_done:
            continue
        targets.append(tid)
        for op, n in sorted(t.executors.items()):
            if op in t.spouts:
                continue
            if t.metrics.per_operator_capacity.get(op, 0.0) > config.capacity_threshold:
                continue
            shrunk = max(1, round_half_up(config.reduction_keep * n))
            if shrunk != n:
                deltas.setdefault(tid, {})[op] = shrunk - n
    return SchedulerAction(ActionKind.REDUCE, tuple(targets), deltas)


def plan_reversion(history: ConfigHistory, snapshot: ClusterSnapshot) -> SchedulerAction:
    best = history.best()
    if best is None:
        return wait("no history to revert to")
    current = snapshot.configuration()
    deltas: dict[str, dict[str, int]] = {}
    for tid, ops in best.configuration.items():
        for op, n in ops.items():
            now = current.get(tid, {}).get(op)
            if now is not None and n != now:
                deltas.setdefault(tid, {})[op] = n - now
    targets = tuple(sorted(t for t in best.configuration if t in current))
    return SchedulerAction(
        ActionKind.REVERT, targets, deltas, reason=f"restore configuration of t={best.time:g}"
    )


def step(
    snapshot: ClusterSnapshot,
    history: ConfigHistory,
    machine: MachineState,
    config: SchedulerConfig = DEFAULT_CONFIG,
) -> tuple[SchedulerAction, MachineState, ConfigHistory]:
    """Advance the state machine by one round."""
    if not snapshot.data_fresh:
        return wait("metrics unavailable"), machine, history

    now = snapshot.time
    total = snapshot.total_utility
    pending = machine.pending
    if pending is not None and now - pending.applied_at < config.quiesce_s - 1e-9:
        return wait(f"quiescing after {pending.kind.value}"), machine, history

    if machine.state is State.CONVERGED:
        if pending is not None:
            # a reversion has settled; its measured utility is the new reference
            return wait("converged"), replace(machine, pending=None, last_best_utility=total), history
        if total >= machine.last_best_utility * (1 - config.converged_drop) - config.drop_epsilon:
            return wait("converged"), machine, history
        history = ConfigHistory()
        machine = MachineState()
        pending = None

    if pending is not None:
        machine = replace(machine, pending=None)
        history = history.record(snapshot)
        if pending.kind is ActionKind.RECONFIGURE:
            if total < pending.total_before - config.drop_epsilon:
                return _recover(snapshot, history, machine, config, total)
            for tid in pending.targets:
                if tid not in snapshot.topologies:
                    continue
                before = pending.target_before.get(tid, 0.0)
                after = snapshot.topologies[tid].utility.current
                if _gain(before, after) < config.min_gain:
                    history = history.with_blacklist(tid, now + config.blacklist_s)
    elif not history.entries:
        history = history.record(snapshot)

    if total >= snapshot.max_total_utility - config.drop_epsilon:
        remaining = machine.stable_rounds_remaining
        remaining = config.stable_rounds if remaining is None else remaining - 1
        if remaining <= 0:
            converged = MachineState(State.CONVERGED, last_best_utility=total)
            return SchedulerAction(ActionKind.CONVERGE), converged, history
        return wait("stabilizing at max utility"), replace(machine, stable_rounds_remaining=remaining), history
    machine = replace(machine, stable_rounds_remaining=None)

    target = select_target(snapshot, history)
    if target is None:
        return wait("no eligible topology"), machine, history
    state = snapshot.topologies[target]
    action = plan_reconfiguration(target, state, config)
    if action.kind is ActionKind.WAIT:
        # nothing to grow: treat like a plateaued topology so the queue moves on
        history = history.with_blacklist(target, now + config.blacklist_s)
        return action, machine, history
    machine = replace(
        machine,
        pending=PendingAction(
            ActionKind.RECONFIGURE, (target,), now, total, {target: state.utility.current}
        ),
    )
    return action, machine, history


def _recover(snapshot, history, machine, config, total):
    if should_reduce(snapshot, history):
        action = plan_reduction(snapshot, history, config)
        history = history.mark_reduced(action.target)
        machine = replace(
            machine, pending=PendingAction(ActionKind.REDUCE, action.target, snapshot.time, total)
        )
        return action, machine, history
    action = plan_reversion(history, snapshot)
    if action.kind is ActionKind.REVERT:
        machine = MachineState(
            State.CONVERGED,
            last_best_utility=history.best().total_utility,
            pending=PendingAction(ActionKind.REVERT, action.target, snapshot.time, total),
        )
    return action, machine, history


def _gain(before: float, after: float) -> float:
    if before > 0:
        return (after - before) / before
    return math.inf if after > before else 0.0


def action_row(
    round_no: int,
    time_s: float,
    action: SchedulerAction,
    before: Optional[float],
    after: Optional[float],
) -> dict[str, str]:
    return {
        "round": str(round_no),
        "time_s": fmt(time_s),
        "action_kind": action.kind.value,
        "target": ";".join(action.target),
        "deltas": action.flat_deltas(),
        "total_utility_before": fmt(before),
        "total_utility_after": fmt(after),
    }
