"""Round loop tying the simulator to the scheduler, plus run reports."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .metrics import METRICS_COLUMNS, InsufficientData, metrics_row
from .scheduler import (
    ACTION_COLUMNS,
    ActionKind,
    ConfigHistory,
    MachineState,
    SchedulerAction,
    SchedulerConfig,
    action_row,
    step,
    wait,
)
from .simulator import Hook, SimConfig, World
from .topology import TopologySpec
from .utility import SATISFIED_TOLERANCE

log = logging.getLogger(__name__)

DEFAULT_SCHEDULER_START_S = 900.0
EFFECTFUL = (ActionKind.RECONFIGURE, ActionKind.REDUCE, ActionKind.REVERT)


@dataclass
class TopologyBinding:
    spec: TopologySpec
    profiles: dict = field(default_factory=dict)  # spout id -> RateProfile
    queue_capacity: Optional[float] = None
    arrive_s: float = 0.0
    depart_s: Optional[float] = None

    def active_at(self, t: float) -> bool:
        return self.arrive_s <= t and (self.depart_s is None or t < self.depart_s)


@dataclass
class Scenario:
    nodes: list
    topologies: list
    duration_s: float
    seed: int = 0
    scheduler_start_s: float = DEFAULT_SCHEDULER_START_S
    sim: SimConfig = field(default_factory=SimConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    faults: list = field(default_factory=list)  # (start, end) pairs
    name: str = "scenario"

    def max_utilities(self) -> dict[str, float]:
        return {b.spec.id: b.spec.slo.max_utility for b in self.topologies}


@dataclass
class RunReport:
    metrics_rows: list
    action_rows: list
    summary: dict
    trace_rows: Optional[list] = None
    final_configuration: dict = field(default_factory=dict)
    actions: list = field(default_factory=list)  # SchedulerAction per round
    history: ConfigHistory = field(default_factory=ConfigHistory)
    machine: MachineState = field(default_factory=MachineState)

    def write(self, out_dir: Path) -> dict[str, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "metrics": out_dir / "metrics.csv",
            "actions": out_dir / "actions.csv",
            "summary": out_dir / "summary.json",
        }
        write_rows(paths["metrics"], METRICS_COLUMNS, self.metrics_rows)
        write_rows(paths["actions"], ACTION_COLUMNS, self.action_rows)
        paths["summary"].write_text(json.dumps(self.summary, indent=2, sort_keys=True) + "\n")
        if self.trace_rows is not None:
            paths["trace"] = out_dir / "trace.csv"
            write_rows(
                paths["trace"],
                ("time_s", "topology_id", "operator", "queue_len", "executed", "dropped"),
                [
                    {
                        "time_s": f"{r.time:.6f}",
                        "topology_id": r.topology,
                        "operator": r.operator,
                        "queue_len": f"{r.queue_len:.6f}",
                        "executed": f"{r.executed:.6f}",
                        "dropped": f"{r.dropped:.6f}",
                    }
                    for r in self.trace_rows
                ],
            )
        return paths


def write_rows(path: Path, columns: Sequence[str], rows: Iterable[Mapping[str, str]]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row)


def read_rows(path: Path) -> list[dict[str, str]]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def build_world(
    scenario: Scenario, seed: Optional[int] = None, hooks: Iterable[Hook] = (), trace: bool = False
) -> World:
    config = replace(scenario.sim, seed=scenario.seed if seed is None else seed)
    world = World(scenario.nodes, config, hooks=hooks, trace=trace)
    for b in scenario.topologies:
        world.add_topology(b.spec, b.profiles, b.queue_capacity, active=b.active_at(0.0))
    for start, end in scenario.faults:
        world.inject_fault(start, end)
    return world


def run_scenario(
    scenario: Scenario,
    use_scheduler: bool = True,
    seed: Optional[int] = None,
    hooks: Iterable[Hook] = (),
    trace: bool = False,
) -> RunReport:
    world = build_world(scenario, seed, hooks, trace)
    cfg = scenario.scheduler
    ticks_per_round = int(round(cfg.round_s / world.config.tick))
    n_ticks = int(round(scenario.duration_s / world.config.tick))
    history, machine = ConfigHistory(), MachineState()

    metrics_rows: list[dict] = []
    actions: list[tuple[int, float, SchedulerAction, float]] = []
    totals: list[float] = []
    round_no = 0
    for k in range(1, n_ticks + 1):
        world.tick()
        if k % ticks_per_round:
            continue
        round_no += 1
        t = world.time
        changed = False
        for b in scenario.topologies:
            active = b.active_at(t)
            if world.topologies[b.spec.id].active != active:
                world.set_active(b.spec.id, active)
                changed = True
        if changed:
            # the job mix changed: past actions say nothing about the new workload
            history, machine = ConfigHistory(), MachineState()

        snapshot = world.snapshot()
        for tid, state in snapshot.topologies.items():
            try:
                m = world.topology_metrics(tid)
            except InsufficientData:
                metrics_rows.append(metrics_row(round_no, t, tid, None, None))
            else:
                metrics_rows.append(metrics_row(round_no, t, tid, m, state.utility.current))
        total = snapshot.total_utility
        totals.append(total)

        if not use_scheduler:
            action = wait("scheduler disabled")
        elif t < scenario.scheduler_start_s - 1e-9:
            action = wait("warm-up")
        else:
            action, machine, history = step(snapshot, history, machine, cfg)
            if action.deltas:
                action = world.apply_action(action)
        actions.append((round_no, t, action, total))

    quiesce_rounds = int(round(cfg.quiesce_s / cfg.round_s))
    action_rows = []
    for idx, (rno, t, action, before) in enumerate(actions):
        ahead = quiesce_rounds if action.kind in EFFECTFUL else 1
        after = totals[idx + ahead] if idx + ahead < len(totals) else None
        action_rows.append(action_row(rno, t, action, before, after))

    summary = summarize(metrics_rows, action_rows, scenario.max_utilities())
    summary["scenario"] = scenario.name
    summary["seed"] = world.config.seed
    summary["scheduler"] = use_scheduler
    return RunReport(
        metrics_rows=metrics_rows,
        action_rows=action_rows,
        summary=summary,
        trace_rows=world.trace_rows,
        final_configuration=world.configuration(),
        actions=[a for _, _, a, _ in actions],
        history=history,
        machine=machine,
    )


def _num(text: str) -> Optional[float]:
    return float(text) if text != "" else None


def summarize(
    metrics_rows: Sequence[Mapping[str, str]],
    action_rows: Sequence[Mapping[str, str]],
    max_utilities: Mapping[str, float],
) -> dict:
    """Per-topology and cluster statistics computed purely from emitted rows."""
    series: dict[str, list[tuple[float, Optional[float]]]] = {tid: [] for tid in max_utilities}
    for row in metrics_rows:
        series.setdefault(row["topology_id"], []).append(
            (float(row["time_s"]), _num(row["utility"]))
        )
    reconfigs = {tid: 0 for tid in series}
    kinds: dict[str, int] = {}
    for row in action_rows:
        kinds[row["action_kind"]] = kinds.get(row["action_kind"], 0) + 1
        if row["action_kind"] == ActionKind.RECONFIGURE.value:
            for tid in row["target"].split(";"):
                reconfigs[tid] = reconfigs.get(tid, 0) + 1

    per_topology = {}
    for tid in sorted(series):
        top = max_utilities.get(tid, 0.0)
        points = [(t, u) for t, u in series[tid] if u is not None]
        sat = [u >= top - SATISFIED_TOLERANCE for _, u in points]
        since = None
        for (t, _), ok in zip(reversed(points), reversed(sat)):
            if not ok:
                break
            since = t
        per_topology[tid] = {
            "max_utility": round(top, 6),
            "final_utility": round(points[-1][1], 6) if points else None,
            "satisfied_fraction": round(sum(sat) / len(sat), 6) if sat else 0.0,
            "reconfigurations": reconfigs.get(tid, 0),
            "convergence_time_s": since,
        }

    by_time: dict[float, float] = {}
    for tid, points in series.items():
        for t, u in points:
            by_time[t] = by_time.get(t, 0.0) + (u or 0.0)
    max_total = round(sum(max_utilities.values()), 6)
    at_max_since = None
    for t in sorted(by_time, reverse=True):
        if by_time[t] < max_total - 1e-6:
            break
        at_max_since = t
    final_total = by_time[max(by_time)] if by_time else 0.0
    return {
        "topologies": per_topology,
        "cluster": {
            "final_total_utility": round(final_total, 6),
            "max_total_utility": max_total,
            "at_max_since_s": at_max_since,
            "rounds": len({row["round"] for row in action_rows}),
            "actions": dict(sorted(kinds.items())),
        },
    }
