"""Utility-driven scheduling of multi-tenant stream-processing topologies."""

from .juice import JuiceReport, operator_juice, per_source_attribution, topology_juice
from .metrics import (
    EdgeWindowCounters,
    ExecutorWindowCounters,
    InsufficientData,
    SlidingWindow,
    TopologyMetrics,
    aggregate_window,
    executor_capacity,
    is_congested,
    operator_capacity,
)
from .scheduler import (
    ActionKind,
    ClusterSnapshot,
    ConfigHistory,
    MachineState,
    SchedulerAction,
    SchedulerConfig,
    State,
    plan_reconfiguration,
    plan_reduction,
    plan_reversion,
    select_target,
    should_reduce,
    step,
)
from .simulator import NodeSpec, SimConfig, World, tuple_latency_estimate
from .topology import EdgeSpec, OperatorKind, OperatorSpec, TopologySpec, sinks, topological_order, validate
from .utility import (
    SloKind,
    SloSpec,
    UtilityValue,
    hybrid_utility,
    latency_utility,
    throughput_utility,
    total_cluster_utility,
)
from .workload import RateProfile, load_trace, rate_at

__version__ = "0.1.0"

__all__ = [
    "ActionKind",
    "ClusterSnapshot",
    "ConfigHistory",
    "EdgeSpec",
    "EdgeWindowCounters",
    "ExecutorWindowCounters",
    "InsufficientData",
    "JuiceReport",
    "MachineState",
    "NodeSpec",
    "OperatorKind",
    "OperatorSpec",
    "RateProfile",
    "SchedulerAction",
    "SchedulerConfig",
    "SimConfig",
    "SlidingWindow",
    "SloKind",
    "SloSpec",
    "State",
    "TopologyMetrics",
    "TopologySpec",
    "UtilityValue",
    "World",
    "aggregate_window",
    "executor_capacity",
    "hybrid_utility",
    "is_congested",
    "latency_utility",
    "load_trace",
    "operator_capacity",
    "operator_juice",
    "per_source_attribution",
    "plan_reconfiguration",
    "plan_reduction",
    "plan_reversion",
    "rate_at",
    "select_target",
    "should_reduce",
    "sinks",
    "step",
    "throughput_utility",
    "topological_order",
    "topology_juice",
    "total_cluster_utility",
    "tuple_latency_estimate",
    "validate",
]
