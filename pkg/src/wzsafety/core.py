"""Shared domain types: trajectories, work-zone geometry and regions.

Coordinate frame: +x runs along the road in the direction of travel, +y points
to the driver's left. Lane ``k`` has its centerline at ``(k + 0.5) * lane_width``
so lane 0 is the rightmost lane.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple, Optional

import numpy as np


class Region(enum.IntEnum):
    UPSTREAM = 0
    WARNING = 1
    UPSTREAM_TRANSITION = 2
    BUFFER = 3
    WORK = 4
    DOWNSTREAM_TRANSITION = 5
    TERMINATION = 6
    DOWNSTREAM = 7


class RegionGroup(str, enum.Enum):
    """Aggregation used by assessment reports (upstream-of-work vs termination)."""

    UPSTREAM = "upstream"
    TERMINATION = "termination"
    OTHER = "other"


_GROUP_OF = {
    Region.UPSTREAM: RegionGroup.UPSTREAM,
    Region.WARNING: RegionGroup.UPSTREAM,
    Region.UPSTREAM_TRANSITION: RegionGroup.UPSTREAM,
    Region.BUFFER: RegionGroup.UPSTREAM,
    Region.TERMINATION: RegionGroup.TERMINATION,
}


def region_group(region: Region) -> RegionGroup:
    return _GROUP_OF.get(region, RegionGroup.OTHER)


class TransitionStyle(str, enum.Enum):
    STEPPED = "stepped"
    GRADUAL = "gradual"


@dataclass(frozen=True)
class ComfortThresholds:
    """Acceleration limits beyond which a manoeuvre counts as unsafe (m/s^2).

    Deceleration uses 2.5 rather than the 2.46 table boundary.
    """

    lat_max: float = 3.6
    lon_accel_max: float = 1.25
    lon_decel_max: float = 2.5

    def __post_init__(self):
        if min(self.lat_max, self.lon_accel_max, self.lon_decel_max) <= 0:
            raise ValueError("comfort thresholds must be strictly positive")


# Upper bounds of the "comfortable" band; tracks inside it never trigger detection.
COMFORTABLE = ComfortThresholds(lat_max=1.8, lon_accel_max=0.89, lon_decel_max=1.48)


@dataclass(frozen=True)
class WorkZoneLayout:
    """Six-area work zone on a straight multi-lane carriageway.

    Buffer, downstream-transition and termination defaults are plumbing values,
    not site measurements.
    """

    warning_length: float = 500.0
    warning_speed_limit: Optional[float] = None  # km/h, None = no limit
    upstream_transition_length: float = 30.0
    upstream_transition_style: TransitionStyle = TransitionStyle.STEPPED
    buffer_length: float = 80.0
    work_length: float = 170.0
    downstream_transition_length: float = 30.0
    termination_length: float = 30.0
    lane_count: int = 4
    closed_lanes: frozenset = frozenset({0, 1})
    lane_width: float = 3.5
    zone_start_x: float = 600.0

    def __post_init__(self):
        object.__setattr__(self, "closed_lanes", frozenset(int(k) for k in self.closed_lanes))
        object.__setattr__(self, "upstream_transition_style",
                           TransitionStyle(self.upstream_transition_style))

    @property
    def lengths(self) -> tuple[float, ...]:
        return (self.warning_length, self.upstream_transition_length, self.buffer_length,
                self.work_length, self.downstream_transition_length, self.termination_length)

    def boundaries(self) -> list[float]:
        """Start of Warning .. start of Downstream (7 cumulative positions)."""
        out = [self.zone_start_x]
        for length in self.lengths:
            out.append(out[-1] + length)
        return out

    def region_span(self, region: Region) -> tuple[float, float]:
        b = self.boundaries()
        if region is Region.UPSTREAM:
            return (-np.inf, b[0])
        if region is Region.DOWNSTREAM:
            return (b[-1], np.inf)
        return (b[region - 1], b[region])

    @property
    def zone_end_x(self) -> float:
        return self.boundaries()[-1]

    @property
    def transition_start_x(self) -> float:
        return self.region_span(Region.UPSTREAM_TRANSITION)[0]

    @property
    def open_lanes(self) -> list[int]:
        return [k for k in range(self.lane_count) if k not in self.closed_lanes]

    def lane_center(self, lane: float) -> float:
        return (lane + 0.5) * self.lane_width

    def replace(self, **changes) -> "WorkZoneLayout":
        return replace(self, **changes)


def region_of(x: float, layout: WorkZoneLayout) -> Region:
    """Region containing ``x``; a point on a boundary belongs to the downstream side."""
    return Region(bisect.bisect_right(layout.boundaries(), x))


def validate_layout(layout: WorkZoneLayout) -> list[str]:
    """Return every invariant violation as a message; an empty list means valid."""
    problems = []
    names = ("warning_length", "upstream_transition_length", "buffer_length", "work_length",
             "downstream_transition_length", "termination_length")
    for name in names:
        value = getattr(layout, name)
        if not np.isfinite(value):
            problems.append(f"{name} is not finite")
        elif value < 0:
            problems.append(f"{name} < 0")
    if layout.lane_count < 2:
        problems.append("lane_count < 2")
    if layout.lane_width <= 0:
        problems.append("lane_width <= 0")
    if not layout.closed_lanes:
        problems.append("closed_lanes is empty")
    bad = sorted(k for k in layout.closed_lanes if not 0 <= k < layout.lane_count)
    if bad:
        problems.append(f"closed_lanes {bad} outside 0..{layout.lane_count - 1}")
    if layout.closed_lanes and len(layout.closed_lanes & set(range(layout.lane_count))) >= layout.lane_count:
        problems.append("closed_lanes covers every lane")
    if layout.warning_speed_limit is not None and layout.warning_speed_limit <= 0:
        problems.append("warning_speed_limit <= 0")
    return problems


class TrajectorySample(NamedTuple):
    t: float
    x: float
    y: float
    v: float


@dataclass(frozen=True, eq=False)
class VehicleTrack:
    """Time-ordered positions of one vehicle, stored column-wise."""

    vehicle_id: str
    vehicle_class: str
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    v: Optional[np.ndarray] = None
    lane: Optional[np.ndarray] = None
    sample_rate_hz: float = field(default=0.0)

    def __post_init__(self):
        for name in ("t", "x", "y", "v"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, np.asarray(value, dtype=float))
        if self.lane is not None:
            object.__setattr__(self, "lane", np.asarray(self.lane, dtype=int))
        if not self.sample_rate_hz and len(self.t) > 1:
            object.__setattr__(self, "sample_rate_hz", float(1.0 / np.median(np.diff(self.t))))

    def __len__(self) -> int:
        return len(self.t)

    @property
    def samples(self) -> Iterator[TrajectorySample]:
        v = self.v if self.v is not None else np.full(len(self.t), np.nan)
        for row in zip(self.t, self.x, self.y, v):
            yield TrajectorySample(*map(float, row))


class KinematicSample(NamedTuple):
    t: float
    x: float
    y: float
    v: float
    rho: float
    a_x: float
    a_y: float
    heading: float


@dataclass(frozen=True, eq=False)
class KinematicTrack:
    """Per-sample kinematics; the first and last raw samples are trimmed."""

    vehicle_id: str
    vehicle_class: str
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    rho: np.ndarray
    a_x: np.ndarray
    a_y: np.ndarray
    heading: np.ndarray
    sample_rate_hz: float

    def __len__(self) -> int:
        return len(self.t)

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate_hz

    @property
    def samples(self) -> Iterator[KinematicSample]:
        cols = (self.t, self.x, self.y, self.v, self.rho, self.a_x, self.a_y, self.heading)
        for row in zip(*cols):
            yield KinematicSample(*map(float, row))
