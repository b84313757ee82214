"""DAG model of a stream-processing job and its structural checks."""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .utility import SloSpec

SHARE_TOLERANCE = 1e-9


class OperatorKind(str, enum.Enum):
    SPOUT = "spout"
    BOLT = "bolt"


class TopologyError(ValueError):
    pass


class CycleError(TopologyError):
    def __init__(self, edge: tuple[str, str]):
        super().__init__(f"cycle detected through edge {edge[0]} -> {edge[1]}")
        self.edge = edge


@dataclass(frozen=True)
class OperatorSpec:
    id: str
    kind: OperatorKind
    parallelism: int = 1
    service_time: float = 1.0
    selectivity: float = 1.0
    state_overhead: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", OperatorKind(self.kind))

    @property
    def is_spout(self) -> bool:
        return self.kind is OperatorKind.SPOUT


@dataclass(frozen=True)
class EdgeSpec:
    src: str
    dst: str
    share: float = 1.0


@dataclass(frozen=True)
class TopologySpec:
    id: str
    operators: tuple[OperatorSpec, ...]
    edges: tuple[EdgeSpec, ...]
    slo: SloSpec
    input_rate: float = 0.0
    _by_id: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "operators", tuple(self.operators))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "_by_id", {op.id: op for op in self.operators})

    def operator(self, op_id: str) -> OperatorSpec:
        try:
            return self._by_id[op_id]
        except KeyError:
            raise TopologyError(f"unknown operator {op_id}") from None

    @property
    def operator_ids(self) -> list[str]:
        return sorted(self._by_id)

    def spouts(self) -> list[str]:
        return sorted(op.id for op in self.operators if op.is_spout)

    def parents(self, op_id: str) -> list[EdgeSpec]:
        return sorted((e for e in self.edges if e.dst == op_id), key=lambda e: e.src)

    def children(self, op_id: str) -> list[EdgeSpec]:
        return sorted((e for e in self.edges if e.src == op_id), key=lambda e: e.dst)


@dataclass(frozen=True)
class Violation:
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.subject}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return bool(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def __len__(self) -> int:
        return len(self.violations)


def validate(spec: TopologySpec) -> ValidationReport:
    """Collect every structural violation; an empty report means valid."""
    found: list[Violation] = []

    def bad(subject: str, message: str) -> None:
        found.append(Violation(subject, message))

    seen: set[str] = set()
    for op in spec.operators:
        if op.id in seen:
            bad(op.id, f"duplicate operator id {op.id}")
        seen.add(op.id)
        if op.parallelism < 1:
            bad(op.id, "parallelism must be >= 1")
        if op.is_spout:
            if op.service_time < 0:
                bad(op.id, "service_time must be >= 0")
        elif not op.service_time > 0:
            bad(op.id, "service_time must be > 0 for bolts")
        if op.selectivity < 0:
            bad(op.id, "selectivity must be >= 0")
        if op.state_overhead < 0:
            bad(op.id, "state_overhead must be >= 0")

    known = {op.id for op in spec.operators}
    share_sums: dict[str, float] = {}
    edge_keys: set[tuple[str, str]] = set()
    for e in spec.edges:
        label = f"{e.src}->{e.dst}"
        for end in (e.src, e.dst):
            if end not in known:
                bad(label, f"unknown operator {end}")
        if (e.src, e.dst) in edge_keys:
            bad(label, "duplicate edge")
        edge_keys.add((e.src, e.dst))
        if not 0 < e.share <= 1:
            bad(label, "share must lie in (0, 1]")
        share_sums[e.src] = share_sums.get(e.src, 0.0) + e.share
        if e.dst in known and spec.operator(e.dst).is_spout:
            bad(label, f"spout {e.dst} cannot have parents")
    for src, total in sorted(share_sums.items()):
        if total > 1 + SHARE_TOLERANCE:
            bad(src, f"share sum exceeds 1 ({total:g})")

    spouts = [op.id for op in spec.operators if op.is_spout]
    if not spouts:
        bad(spec.id, "topology has no spout")
    if spec.operators and not sinks(spec):
        bad(spec.id, "topology has no sink")
    if spec.input_rate < 0:
        bad(spec.id, "input_rate must be >= 0")
    for problem in spec.slo.violations():
        bad(f"{spec.id}.slo", problem)

    edges_ok = [e for e in spec.edges if e.src in known and e.dst in known]
    try:
        _kahn(spec, edges_ok)
    except CycleError as err:
        bad(f"{err.edge[0]}->{err.edge[1]}", "cycle detected")
    reached = _reachable(spouts, edges_ok)
    for op in sorted(known - reached):
        bad(op, "not reachable from any spout")

    return ValidationReport(tuple(found))


def sinks(spec: TopologySpec) -> list[str]:
    with_children = {e.src for e in spec.edges}
    return sorted(op.id for op in spec.operators if op.id not in with_children)


def topological_order(spec: TopologySpec) -> list[str]:
    """Parents before children; spouts first, then ties broken by id."""
    return _kahn(spec, spec.edges)


def _kahn(spec: TopologySpec, edges: Iterable[EdgeSpec]) -> list[str]:
    edges = list(edges)
    indegree = {op.id: 0 for op in spec.operators}
    out: dict[str, list[str]] = {op.id: [] for op in spec.operators}
    for e in edges:
        indegree[e.dst] += 1
        out[e.src].append(e.dst)

    def key(op_id: str) -> tuple[int, str]:
        return (0 if spec.operator(op_id).is_spout else 1, op_id)

    ready = [key(op) for op, d in indegree.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        _, op = heapq.heappop(ready)
        order.append(op)
        for child in out[op]:
            indegree[child] -= 1
            if indegree[child] == 0:
                heapq.heappush(ready, key(child))
    if len(order) < len(indegree):
        raise CycleError(_find_back_edge({op for op, d in indegree.items() if d > 0}, edges))
    return order


def _find_back_edge(remaining: set[str], edges: list[EdgeSpec]) -> tuple[str, str]:
    out: dict[str, list[str]] = {}
    for e in edges:
        if e.src in remaining and e.dst in remaining:
            out.setdefault(e.src, []).append(e.dst)
    state: dict[str, int] = {}

    def dfs(node: str) -> Optional[tuple[str, str]]:
        state[node] = 1
        for child in sorted(out.get(node, [])):
            if state.get(child) == 1:
                return (node, child)
            if child not in state:
                found = dfs(child)
                if found:
                    return found
        state[node] = 2
        return None

    for start in sorted(remaining):
        if start not in state:
            found = dfs(start)
            if found:
                return found
    raise AssertionError("no cycle among remaining operators")  # pragma: no cover


def _reachable(roots: Iterable[str], edges: Iterable[EdgeSpec]) -> set[str]:
    out: dict[str, list[str]] = {}
    for e in edges:
        out.setdefault(e.src, []).append(e.dst)
    seen = set(roots)
    stack = list(seen)
    while stack:
        node = stack.pop()
        for child in out.get(node, []):
            if child not in seen:
                seen.add(child)
                stack.append(child)
    return seen
