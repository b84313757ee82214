"""Time-varying spout input rates: constant, spike, and trace-driven."""

from __future__ import annotations

import bisect
import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

DEFAULT_COMPRESSION_S = 600.0  # one trace hour -> ten simulated minutes


class ProfileKind(str, enum.Enum):
    CONSTANT = "constant"
    SPIKE = "spike"
    TRACE = "trace"


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class Spike:
    start: float
    end: float
    multiplier: float


@dataclass(frozen=True)
class RateProfile:
    kind: ProfileKind
    base_rate: float
    spike: Optional[Spike] = None
    trace: tuple[tuple[float, float], ...] = ()  # (offset s, multiplier), step-held

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ProfileKind(self.kind))
        object.__setattr__(self, "trace", tuple((float(o), float(m)) for o, m in self.trace))
        if self.base_rate < 0:
            raise ValueError("base_rate must be >= 0")
        if self.kind is ProfileKind.SPIKE and self.spike is None:
            raise ValueError("spike profile needs a spike")
        offsets = [o for o, _ in self.trace]
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ValueError("trace offsets must be strictly increasing")
        if any(m < 0 for _, m in self.trace):
            raise ValueError("trace multipliers must be >= 0")

    @property
    def duration(self) -> float:
        """End of the last trace step, assuming steps of equal length."""
        if len(self.trace) < 2:
            return self.trace[-1][0] if self.trace else 0.0
        step = self.trace[1][0] - self.trace[0][0]
        return self.trace[-1][0] + step


def constant(rate: float) -> RateProfile:
    return RateProfile(ProfileKind.CONSTANT, rate)


def spike(base_rate: float, start: float, end: float, multiplier: float) -> RateProfile:
    return RateProfile(ProfileKind.SPIKE, base_rate, spike=Spike(start, end, multiplier))


def rate_at(profile: RateProfile, t: float) -> float:
    if profile.kind is ProfileKind.CONSTANT:
        return profile.base_rate
    if profile.kind is ProfileKind.SPIKE:
        s = profile.spike
        inside = s.start <= t < s.end
        return profile.base_rate * (s.multiplier if inside else 1.0)
    offsets = [o for o, _ in profile.trace]
    idx = bisect.bisect_right(offsets, t) - 1
    if idx < 0:
        return profile.base_rate
    return profile.base_rate * profile.trace[idx][1]


def load_trace(
    path: Union[str, Path],
    base_rate: float = 1.0,
    compression_s: float = DEFAULT_COMPRESSION_S,
) -> RateProfile:
    """Read ``offset_hours,multiplier`` rows; each trace hour spans ``compression_s``."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TraceError(f"{path}: empty trace file")
    header = [c.strip() for c in rows[0]]
    if header != ["offset_hours", "multiplier"]:
        raise TraceError(f"{path}:1: expected header 'offset_hours,multiplier'")
    points = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise TraceError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
        try:
            hours, mult = float(row[0]), float(row[1])
        except ValueError:
            raise TraceError(f"{path}:{lineno}: non-numeric value") from None
        if not (math.isfinite(hours) and math.isfinite(mult)) or mult < 0:
            raise TraceError(f"{path}:{lineno}: invalid value")
        if points and hours * compression_s <= points[-1][0]:
            raise TraceError(f"{path}:{lineno}: offsets must be strictly increasing")
        points.append((hours * compression_s, mult))
    if not points:
        raise TraceError(f"{path}: trace has no rows")
    return RateProfile(ProfileKind.TRACE, base_rate, trace=tuple(points))


def synthetic_diurnal(
    hours: int = 48, trough: float = 0.4, peak: float = 1.0, rise_hour: float = 7.0,
    peak_hour: float = 40.0 / 3.0,
) -> list[tuple[float, float]]:
    """Hourly (offset_hours, multiplier) pairs with one trough-peak-trough day cycle.

    The load sits at ``trough`` overnight, ramps from ``rise_hour`` to
    ``peak_hour`` on a half-cosine, then falls back symmetrically.
    """
    points = []
    fall_end = 2 * peak_hour - rise_hour
    for h in range(hours):
        hod = h % 24 + 0.5
        if rise_hour <= hod <= fall_end:
            phase = (hod - rise_hour) / (fall_end - rise_hour)
            level = trough + (peak - trough) * 0.5 * (1 - math.cos(2 * math.pi * phase))
        else:
            level = trough
        points.append((float(h), round(level, 6)))
    return points


def write_trace(path: Union[str, Path], points: Sequence[tuple[float, float]]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["offset_hours", "multiplier"])
        for hours, mult in points:
            w.writerow([f"{hours:g}", f"{mult:g}"])
