"""Rate-independent throughput ("juice") from windowed edge counters.

Every operator carries one juice value per source: the share of that
source's input which the operator received and processed.  Juice flows
forward from the spouts (1.0 for their own source) and is summed over the
sinks, normalized by the number of sources.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .metrics import EdgeWindowCounters, InsufficientData
from .topology import TopologySpec, sinks, topological_order


@dataclass(frozen=True)
class JuiceReport:
    per_operator: Mapping[tuple[str, str], float]  # (operator, source) -> juice
    topology_juice: float
    sources: int
    sink_ids: tuple[str, ...] = ()

    def juice_of(self, op_id: str) -> float:
        """Juice of ``op_id`` summed over all sources."""
        return sum(v for (op, _), v in self.per_operator.items() if op == op_id)


def operator_juice(
    parent_juices: Sequence[float], counters: Sequence[EdgeWindowCounters]
) -> float:
    if len(parent_juices) != len(counters):
        raise ValueError(
            f"{len(parent_juices)} parent juices but {len(counters)} edge counters"
        )
    total = 0.0
    for parent, c in zip(parent_juices, counters):
        if c.sent > 0:
            total += parent * (c.executed / c.sent)
    return total


def topology_juice(
    spec: TopologySpec,
    window: Mapping[tuple[str, str], EdgeWindowCounters],
    sink_weights: Optional[Mapping[str, float]] = None,
) -> JuiceReport:
    """Forward pass over the DAG; ``window`` is keyed by (parent, child)."""
    spouts = spec.spouts()
    missing = [(e.src, e.dst) for e in spec.edges if (e.src, e.dst) not in window]
    if missing:
        raise InsufficientData(f"no counters for edges {missing}")

    juice: dict[tuple[str, str], float] = {}
    for op_id in topological_order(spec):
        parents = spec.parents(op_id)
        for source in spouts:
            if spec.operator(op_id).is_spout:
                juice[(op_id, source)] = 1.0 if op_id == source else 0.0
                continue
            juice[(op_id, source)] = operator_juice(
                [juice[(e.src, source)] for e in parents],
                [window[(e.src, e.dst)] for e in parents],
            )

    sink_ids = tuple(sinks(spec))
    weights = sink_weights or {}
    numerator = sum(
        weights.get(sink, 1.0) * juice[(sink, source)] for sink in sink_ids for source in spouts
    )
    return JuiceReport(
        per_operator=juice,
        topology_juice=numerator / len(spouts),
        sources=len(spouts),
        sink_ids=sink_ids,
    )


def per_source_attribution(report: JuiceReport, sink: str) -> dict[str, float]:
    if sink not in report.sink_ids:
        raise KeyError(f"{sink} is not a sink of this topology")
    return {source: v for (op, source), v in sorted(report.per_operator.items()) if op == sink}
