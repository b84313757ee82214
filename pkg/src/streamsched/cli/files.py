"""Readers for topology, stats, and scenario files (YAML or JSON)."""

from __future__ import annotations

import csv
import json
from dataclasses import fields, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..metrics import EdgeWindowCounters
from ..runner import Scenario, TopologyBinding
from ..scheduler import SchedulerConfig
from ..simulator import NodeSpec, SimConfig
from ..topology import EdgeSpec, OperatorSpec, TopologySpec
from ..utility import SloSpec
from ..workload import RateProfile, ProfileKind, Spike, TraceError, load_trace, DEFAULT_COMPRESSION_S


class FileFormatError(ValueError):
    """A file parsed but its content does not fit the schema."""


def read_tree(path: Path) -> Any:
    """Load a YAML or JSON document; OSError propagates for I/O problems."""
    text = Path(path).read_text()
    try:
        if Path(path).suffix.lower() == ".json":
            return json.loads(text)
        return yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as err:
        raise FileFormatError(f"{path}: cannot parse: {err}") from None


def _get(tree: Mapping, key: str, where: str, default: Any = ...) -> Any:
    if not isinstance(tree, Mapping):
        raise FileFormatError(f"{where}: expected a mapping")
    if key in tree:
        return tree[key]
    if default is ...:
        raise FileFormatError(f"{where}: missing field '{key}'")
    return default


def parse_slo(tree: Mapping, where: str = "slo") -> SloSpec:
    try:
        return SloSpec(
            kind=_get(tree, "kind", where),
            max_utility=float(_get(tree, "max_utility", where)),
            latency_threshold=_opt_float(tree.get("latency_threshold_ms")),
            juice_threshold=_opt_float(tree.get("juice_threshold")),
        )
    except (TypeError, ValueError) as err:
        if isinstance(err, FileFormatError):
            raise
        raise FileFormatError(f"{where}: {err}") from None


def _opt_float(value: Any) -> Any:
    return None if value is None else float(value)


def parse_topology(tree: Mapping, where: str = "topology") -> TopologySpec:
    ops = []
    for i, op in enumerate(_get(tree, "operators", where) or []):
        at = f"{where}.operators[{i}]"
        try:
            ops.append(
                OperatorSpec(
                    id=str(_get(op, "id", at)),
                    kind=_get(op, "kind", at),
                    parallelism=int(op.get("parallelism", 1)),
                    service_time=float(op.get("service_time", 1.0)),
                    selectivity=float(op.get("selectivity", 1.0)),
                    state_overhead=float(op.get("state_overhead", 0.0)),
                )
            )
        except (TypeError, ValueError) as err:
            if isinstance(err, FileFormatError):
                raise
            raise FileFormatError(f"{at}: {err}") from None
    edges = []
    for i, e in enumerate(_get(tree, "edges", where, []) or []):
        at = f"{where}.edges[{i}]"
        try:
            edges.append(
                EdgeSpec(str(_get(e, "from", at)), str(_get(e, "to", at)), float(e.get("share", 1.0)))
            )
        except (TypeError, ValueError) as err:
            if isinstance(err, FileFormatError):
                raise
            raise FileFormatError(f"{at}: {err}") from None
    return TopologySpec(
        id=str(_get(tree, "id", where)),
        operators=tuple(ops),
        edges=tuple(edges),
        slo=parse_slo(_get(tree, "slo", where), f"{where}.slo"),
        input_rate=float(tree.get("input_rate", 0.0)),
    )


def load_topology(path: Path) -> TopologySpec:
    return parse_topology(read_tree(path), str(path))


def topology_to_tree(spec: TopologySpec) -> dict:
    slo = {"kind": spec.slo.kind.value, "max_utility": spec.slo.max_utility}
    if spec.slo.latency_threshold is not None:
        slo["latency_threshold_ms"] = spec.slo.latency_threshold
    if spec.slo.juice_threshold is not None:
        slo["juice_threshold"] = spec.slo.juice_threshold
    return {
        "id": spec.id,
        "input_rate": spec.input_rate,
        "slo": slo,
        "operators": [
            {
                "id": op.id,
                "kind": op.kind.value,
                "parallelism": op.parallelism,
                "service_time": op.service_time,
                "selectivity": op.selectivity,
                "state_overhead": op.state_overhead,
            }
            for op in spec.operators
        ],
        "edges": [{"from": e.src, "to": e.dst, "share": e.share} for e in spec.edges],
    }


def load_stats(path: Path) -> dict[tuple[str, str], EdgeWindowCounters]:
    """CSV with header ``parent,child,sent,executed``; one row per edge."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"parent", "child", "sent", "executed"}
        if reader.fieldnames is None or not expected <= set(reader.fieldnames):
            raise FileFormatError(f"{path}:1: expected columns parent,child,sent,executed")
        out = {}
        for lineno, row in enumerate(reader, start=2):
            try:
                counters = EdgeWindowCounters(float(row["sent"]), float(row["executed"]))
            except (TypeError, ValueError):
                raise FileFormatError(f"{path}:{lineno}: non-numeric counter") from None
            if counters.sent < 0 or counters.executed < 0:
                raise FileFormatError(f"{path}:{lineno}: counters must be >= 0")
            out[(row["parent"], row["child"])] = counters
    return out


def _dataclass_overrides(cls, base, tree: Mapping, where: str):
    if not tree:
        return base
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(tree) - names)
    if unknown:
        raise FileFormatError(f"{where}: unknown field(s) {', '.join(unknown)}")
    try:
        return replace(base, **tree)
    except (TypeError, ValueError) as err:
        raise FileFormatError(f"{where}: {err}") from None


def parse_nodes(tree: Any, where: str = "nodes") -> list[NodeSpec]:
    try:
        if isinstance(tree, Mapping):
            count = int(_get(tree, "count", where))
            return [
                NodeSpec(f"n{i}", int(tree.get("cores", 8)), float(tree.get("background_load", 0.0)))
                for i in range(count)
            ]
        return [
            NodeSpec(
                str(_get(n, "id", f"{where}[{i}]")),
                int(n.get("cores", 8)),
                float(n.get("background_load", 0.0)),
            )
            for i, n in enumerate(tree or [])
        ]
    except (TypeError, ValueError) as err:
        if isinstance(err, FileFormatError):
            raise
        raise FileFormatError(f"{where}: {err}") from None


def parse_profile(tree: Mapping, base_rate: float, root: Path, where: str) -> RateProfile:
    kind = _get(tree, "kind", where)
    rate = float(tree.get("base_rate", base_rate))
    try:
        kind = ProfileKind(kind)
        if kind is ProfileKind.CONSTANT:
            return RateProfile(kind, rate)
        if kind is ProfileKind.SPIKE:
            s = Spike(
                float(_get(tree, "start", where)),
                float(_get(tree, "end", where)),
                float(_get(tree, "multiplier", where)),
            )
            return RateProfile(kind, rate, spike=s)
        if "file" in tree:
            return load_trace(
                root / tree["file"], rate, float(tree.get("compression_s", DEFAULT_COMPRESSION_S))
            )
        compression = float(tree.get("compression_s", DEFAULT_COMPRESSION_S))
        points = tuple((float(h) * compression, float(m)) for h, m in _get(tree, "points", where))
        return RateProfile(kind, rate, trace=points)
    except TraceError:
        raise
    except (TypeError, ValueError) as err:
        if isinstance(err, FileFormatError):
            raise
        raise FileFormatError(f"{where}: {err}") from None


def load_scenario(path: Path) -> Scenario:
    path = Path(path)
    root = path.parent
    tree = read_tree(path)
    where = str(path)
    if not isinstance(tree, Mapping):
        raise FileFormatError(f"{where}: expected a mapping at top level")

    bindings: list[TopologyBinding] = []
    for i, entry in enumerate(_get(tree, "topologies", where)):
        at = f"{where}: topologies[{i}]"
        if "file" in entry:
            base = read_tree(root / entry["file"])
        else:
            base = _get(entry, "topology", at)
        base = dict(base)
        if "slo" in entry:
            base["slo"] = {**base.get("slo", {}), **entry["slo"]}
        if "input_rate" in entry:
            base["input_rate"] = entry["input_rate"]
        base_id = str(entry.get("id", base.get("id")))
        count = int(entry.get("count", 1))
        for j in range(count):
            tree_j = dict(base)
            tree_j["id"] = base_id if count == 1 else f"{base_id}-{j + 1}"
            spec = parse_topology(tree_j, at)
            bindings.append(
                TopologyBinding(
                    spec=spec,
                    queue_capacity=_opt_float(entry.get("queue_capacity")),
                    arrive_s=float(entry.get("arrive_s", 0.0)),
                    depart_s=_opt_float(entry.get("depart_s")),
                )
            )

    by_id = {b.spec.id: b for b in bindings}
    if len(by_id) != len(bindings):
        raise FileFormatError(f"{where}: duplicate topology ids")
    for i, wl in enumerate(tree.get("workloads", []) or []):
        at = f"{where}: workloads[{i}]"
        tid = str(_get(wl, "topology", at))
        if tid not in by_id:
            raise FileFormatError(f"{at}: unknown topology {tid}")
        spec = by_id[tid].spec
        spout = str(wl.get("spout", spec.spouts()[0] if spec.spouts() else ""))
        if spout not in spec.spouts():
            raise FileFormatError(f"{at}: {tid} has no spout {spout}")
        by_id[tid].profiles[spout] = parse_profile(wl, spec.input_rate, root, at)

    faults = []
    for i, f in enumerate(tree.get("faults", []) or []):
        at = f"{where}: faults[{i}]"
        faults.append((float(_get(f, "start", at)), float(_get(f, "end", at))))

    sim = _dataclass_overrides(SimConfig, SimConfig(), tree.get("sim") or {}, f"{where}: sim")
    sched = _dataclass_overrides(
        SchedulerConfig, SchedulerConfig(), tree.get("scheduler") or {}, f"{where}: scheduler"
    )
    try:
        return Scenario(
            nodes=parse_nodes(_get(tree, "nodes", where), f"{where}: nodes"),
            topologies=bindings,
            duration_s=float(_get(tree, "duration_s", where)),
            seed=int(tree.get("seed", 0)),
            scheduler_start_s=float(tree.get("scheduler_start_s", 900.0)),
            sim=sim,
            scheduler=sched,
            faults=faults,
            name=str(tree.get("name", path.stem)),
        )
    except (TypeError, ValueError) as err:
        if isinstance(err, FileFormatError):
            raise
        raise FileFormatError(f"{where}: {err}") from None
