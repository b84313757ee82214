"""SLO definitions and knee utility functions."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional

SATISFIED_TOLERANCE = 1e-9


class SloKind(str, enum.Enum):
    LATENCY = "latency"
    THROUGHPUT = "throughput"
    HYBRID = "hybrid"


class UtilityError(ValueError):
    pass


@dataclass(frozen=True)
class SloSpec:
    """A performance threshold plus the maximum utility (job priority).

    ``latency_threshold`` is in milliseconds and required for latency and
    hybrid SLOs; ``juice_threshold`` lies in (0, 1] and is required for
    throughput and hybrid SLOs.
    """

    kind: SloKind
    max_utility: float
    latency_threshold: Optional[float] = None
    juice_threshold: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SloKind(self.kind))

    def violations(self) -> list[str]:
        problems = []
        if not self.max_utility > 0:
            problems.append("max_utility must be > 0")
        if self.kind in (SloKind.LATENCY, SloKind.HYBRID):
            if self.latency_threshold is None:
                problems.append(f"{self.kind.value} SLO requires latency_threshold")
            elif not self.latency_threshold > 0:
                problems.append("latency_threshold must be > 0")
        if self.kind in (SloKind.THROUGHPUT, SloKind.HYBRID):
            if self.juice_threshold is None:
                problems.append(f"{self.kind.value} SLO requires juice_threshold")
            elif not 0 < self.juice_threshold <= 1:
                problems.append("juice_threshold must lie in (0, 1]")
        return problems


@dataclass(frozen=True)
class UtilityValue:
    """Achieved utility; ``satisfied`` defaults to the plateau test."""

    current: float
    max: float
    satisfied: bool = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.satisfied is None:
            object.__setattr__(
                self, "satisfied", self.current >= self.max - SATISFIED_TOLERANCE
            )


def throughput_utility(current_juice: float, slo: SloSpec) -> UtilityValue:
    """Linear sub-SLO from the origin, plateau at ``max_utility``."""
    if slo.juice_threshold is None:
        raise UtilityError("SLO has no juice threshold")
    if current_juice < 0:
        raise UtilityError(f"negative juice {current_juice}")
    ratio = min(1.0, current_juice / slo.juice_threshold)
    return UtilityValue(slo.max_utility * ratio, slo.max_utility)


def latency_utility(current_latency: float, slo: SloSpec) -> UtilityValue:
    """Hyperbolic sub-SLO: utility falls as threshold / latency."""
    if slo.latency_threshold is None:
        raise UtilityError("SLO has no latency threshold")
    if not current_latency > 0:
        raise UtilityError(f"latency must be positive, got {current_latency}")
    ratio = min(1.0, slo.latency_threshold / current_latency)
    return UtilityValue(slo.max_utility * ratio, slo.max_utility)


def hybrid_utility(latency_u: UtilityValue, juice_u: UtilityValue) -> UtilityValue:
    if abs(latency_u.max - juice_u.max) > SATISFIED_TOLERANCE:
        raise UtilityError(
            f"hybrid components disagree on max utility ({latency_u.max} vs {juice_u.max})"
        )
    return UtilityValue(
        (latency_u.current + juice_u.current) / 2.0,
        latency_u.max,
        satisfied=latency_u.satisfied and juice_u.satisfied,
    )


def evaluate(slo: SloSpec, latency: Optional[float], juice: Optional[float]) -> UtilityValue:
    """Dispatch on the SLO kind; the unused metric may be ``None``."""
    if slo.kind is SloKind.LATENCY:
        return latency_utility(_required(latency, "latency"), slo)
    if slo.kind is SloKind.THROUGHPUT:
        return throughput_utility(_required(juice, "juice"), slo)
    return hybrid_utility(
        latency_utility(_required(latency, "latency"), slo),
        throughput_utility(_required(juice, "juice"), slo),
    )


def _required(value: Optional[float], name: str) -> float:
    if value is None:
        raise UtilityError(f"{name} is required for this SLO")
    return value


def total_cluster_utility(per_topology: Iterable[UtilityValue]) -> float:
    return float(sum(u.current for u in per_topology))
