"""Windowed counters, operator capacity, and the per-round metrics export."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Optional, Sequence

CONGESTION_THRESHOLD = 0.3
SUB_WINDOWS = 6
SUB_WINDOW_LEN_S = 10.0

METRICS_COLUMNS = (
    "round",
    "time_s",
    "topology_id",
    "latency_ms",
    "juice",
    "utility",
    "input_rate",
    "output_rate",
)


class InsufficientData(Exception):
    """Raised when a window holds no complete sub-window (or lacks a counter).

    The scheduler treats this as a reason to wait, never as a zero reading.
    """


@dataclass(frozen=True)
class EdgeWindowCounters:
    """Tuples a parent sent out and how many of them the child executed."""

    sent: float
    executed: float


@dataclass(frozen=True)
class ExecutorWindowCounters:
    executed_tuples: float
    execute_latency: float  # mean ms per executed tuple
    window: float  # ms


@dataclass(frozen=True)
class TopologyMetrics:
    latency: Optional[float]
    juice: Optional[float]
    input_rate: float
    output_rate: float
    per_operator_capacity: Mapping[str, float] = field(default_factory=dict)


def executor_capacity(c: ExecutorWindowCounters) -> float:
    """Fraction of the window spent executing, clamped to [0, 1]."""
    if not c.window > 0:
        raise ValueError(f"window must be positive, got {c.window}")
    return max(0.0, min(1.0, c.executed_tuples * c.execute_latency / c.window))


def operator_capacity(per_executor: Sequence[float]) -> float:
    if len(per_executor) == 0:
        raise ValueError("operator has no executor capacities")
    return max(per_executor)


def is_congested(cap: float, threshold: float = CONGESTION_THRESHOLD) -> bool:
    return cap > threshold


@dataclass
class _Bucket:
    counts: dict = field(default_factory=dict)
    latency: dict = field(default_factory=dict)  # key -> [weighted sum, weight]

    def add(self, key: Hashable, amount: float) -> None:
        self.counts[key] = self.counts.get(key, 0.0) + amount

    def add_latency(self, key: Hashable, latency_ms: float, weight: float) -> None:
        slot = self.latency.setdefault(key, [0.0, 0.0])
        slot[0] += latency_ms * weight
        slot[1] += weight


@dataclass(frozen=True)
class WindowAggregate:
    counts: Mapping[Hashable, float]
    latencies: Mapping[Hashable, float]
    weights: Mapping[Hashable, float]
    span_s: float
    sub_windows: int

    def count(self, key: Hashable, default: Optional[float] = None) -> float:
        if key in self.counts:
            return self.counts[key]
        if default is None:
            raise InsufficientData(f"no counter {key!r} in window")
        return default

    def mean_latency(self, key: Hashable) -> float:
        if self.weights.get(key, 0.0) <= 0:
            raise InsufficientData(f"no latency samples for {key!r}")
        return self.latencies[key]

    def rate(self, key: Hashable) -> float:
        return self.count(key, 0.0) / self.span_s


class SlidingWindow:
    """Ring of complete sub-windows plus the one currently filling.

    Callers record into the open sub-window and ``advance`` the clock; a
    sub-window closes every ``sub_window_len`` seconds and the oldest closed
    one falls off once ``sub_windows`` are held.
    """

    def __init__(self, sub_windows: int = SUB_WINDOWS, sub_window_len: float = SUB_WINDOW_LEN_S):
        if sub_windows < 1 or not sub_window_len > 0:
            raise ValueError("need at least one sub-window of positive length")
        self.sub_windows = sub_windows
        self.sub_window_len = sub_window_len
        self._closed: deque[_Bucket] = deque(maxlen=sub_windows)
        self._open = _Bucket()
        self._elapsed = 0.0

    @property
    def span(self) -> float:
        return self.sub_windows * self.sub_window_len

    @property
    def complete(self) -> int:
        return len(self._closed)

    def add(self, key: Hashable, amount: float) -> None:
        self._open.add(key, amount)

    def add_latency(self, key: Hashable, latency_ms: float, weight: float) -> None:
        if weight > 0:
            self._open.add_latency(key, latency_ms, weight)

    def advance(self, seconds: float) -> None:
        self._elapsed += seconds
        # tolerate float drift from fractional ticks
        while self._elapsed >= self.sub_window_len - 1e-9:
            self._elapsed -= self.sub_window_len
            self._closed.append(self._open)
            self._open = _Bucket()

    def reset(self) -> None:
        self._closed.clear()
        self._open = _Bucket()
        self._elapsed = 0.0

    def aggregate(self) -> WindowAggregate:
        return aggregate_window(self)

    def closed_buckets(self) -> list[_Bucket]:
        return list(self._closed)


def aggregate_window(w: SlidingWindow) -> WindowAggregate:
    """Sum counts and weight-average latencies over complete sub-windows."""
    buckets = w.closed_buckets()
    if not buckets:
        raise InsufficientData("no complete sub-window yet")
    counts: dict = {}
    lat_sum: dict = {}
    lat_weight: dict = {}
    for b in buckets:
        for key, value in b.counts.items():
            counts[key] = counts.get(key, 0.0) + value
        for key, (weighted, weight) in b.latency.items():
            lat_sum[key] = lat_sum.get(key, 0.0) + weighted
            lat_weight[key] = lat_weight.get(key, 0.0) + weight
    latencies = {k: lat_sum[k] / lat_weight[k] for k in lat_sum if lat_weight[k] > 0}
    return WindowAggregate(
        counts=counts,
        latencies=latencies,
        weights=lat_weight,
        span_s=len(buckets) * w.sub_window_len,
        sub_windows=len(buckets),
    )


def fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def metrics_row(
    round_no: int,
    time_s: float,
    topology_id: str,
    metrics: Optional[TopologyMetrics],
    utility: Optional[float],
) -> dict[str, str]:
    if metrics is None:
        values: Iterable[Optional[float]] = (None, None, utility, None, None)
    else:
        values = (metrics.latency, metrics.juice, utility, metrics.input_rate, metrics.output_rate)
    row = {"round": str(round_no), "time_s": fmt(time_s), "topology_id": topology_id}
    row.update(zip(METRICS_COLUMNS[3:], (fmt(v) for v in values)))
    return row
