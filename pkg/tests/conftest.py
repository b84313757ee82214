import pytest

from streamsched.metrics import EdgeWindowCounters
from streamsched.topology import EdgeSpec, OperatorSpec, TopologySpec
from streamsched.utility import SloSpec

LATENCY_SLO = SloSpec("latency", 35.0, latency_threshold=20.0)
JUICE_SLO = SloSpec("throughput", 10.0, juice_threshold=1.0)


def spout(op_id="spout", parallelism=1, service_time=0.1, selectivity=1.0):
    return OperatorSpec(op_id, "spout", parallelism, service_time, selectivity)


def bolt(op_id, parallelism=1, service_time=1.0, selectivity=1.0, state_overhead=0.0):
    return OperatorSpec(op_id, "bolt", parallelism, service_time, selectivity, state_overhead)


def make_chain(tid="t", rate=1000.0, services=(0.1, 5.0, 1.0), parallelism=(1, 2, 2), slo=LATENCY_SLO):
    """spout -> b1 -> b2 ... with the given per-operator service times."""
    ids = ["spout"] + [f"b{i}" for i in range(1, len(services))]
    ops = [spout(ids[0], parallelism[0], services[0])]
    ops += [bolt(i, p, s) for i, p, s in zip(ids[1:], parallelism[1:], services[1:])]
    edges = [EdgeSpec(a, b) for a, b in zip(ids, ids[1:])]
    return TopologySpec(tid, tuple(ops), tuple(edges), slo, rate)


@pytest.fixture
def diamond_spec():
    """spout -> A -> {B, C} -> D, A splitting its output evenly."""
    ops = (spout(), bolt("A", selectivity=1.6), bolt("B"), bolt("C"), bolt("D"))
    edges = (
        EdgeSpec("spout", "A"),
        EdgeSpec("A", "B", 0.5),
        EdgeSpec("A", "C", 0.5),
        EdgeSpec("B", "D"),
        EdgeSpec("C", "D"),
    )
    return TopologySpec("diamond", ops, edges, JUICE_SLO, 10_000.0)


@pytest.fixture
def diamond_counts():
    K = 1000.0
    return {
        ("spout", "A"): EdgeWindowCounters(10 * K, 10 * K),
        ("A", "B"): EdgeWindowCounters(16 * K, 8 * K),
        ("A", "C"): EdgeWindowCounters(16 * K, 6 * K),
        ("B", "D"): EdgeWindowCounters(8 * K, 8 * K),
        ("C", "D"): EdgeWindowCounters(6 * K, 6 * K),
    }


@pytest.fixture
def split_merge_spec():
    """Two spouts; E splits to B and F; A and E merge at B; sinks C and F."""
    ops = (
        spout("spout1"),
        spout("spout2"),
        bolt("A"),
        bolt("B"),
        bolt("C"),
        bolt("D"),
        bolt("E"),
        bolt("F"),
    )
    edges = (
        EdgeSpec("spout1", "A"),
        EdgeSpec("A", "B"),
        EdgeSpec("B", "C"),
        EdgeSpec("spout2", "D"),
        EdgeSpec("D", "E"),
        EdgeSpec("E", "B", 0.5),
        EdgeSpec("E", "F", 0.5),
    )
    return TopologySpec("split-merge", ops, edges, JUICE_SLO, 10_000.0)


@pytest.fixture
def split_merge_counts():
    return {
        ("spout1", "A"): EdgeWindowCounters(10_000, 5_000),
        ("A", "B"): EdgeWindowCounters(5_000, 5_000),
        ("spout2", "D"): EdgeWindowCounters(10_000, 10_000),
        ("D", "E"): EdgeWindowCounters(10_000, 5_000),
        ("E", "B"): EdgeWindowCounters(5_000, 2_500),
        ("E", "F"): EdgeWindowCounters(5_000, 2_000),
        ("B", "C"): EdgeWindowCounters(7_500, 7_500),
    }
