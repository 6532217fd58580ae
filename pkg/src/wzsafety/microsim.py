"""Fixed-step microscopic simulator for a lane-closure work zone.

Vehicles follow a dead-band car-following law parameterised by the five
calibrated driving parameters (standstill distance, headway time, following
variation, waiting time before diffusion, minimum headway), change lanes by
gap acceptance, and are removed by diffusion after waiting too long for a
mandatory merge.

Model notes
-----------
* Closed lanes end before the upstream transition is passed. With a stepped
  transition the outermost closed lane ends at the transition start and each
  further closed lane ``L / n_closed`` later; a gradual taper shifts every end
  one step downstream, which leaves more room for the last merges.
* Drivers in a closed lane start their mandatory merge once inside the warning
  area and within their own notice distance of the transition; the manoeuvre
  is shortened when little room is left before the lane ends.
* A lane change moves the vehicle laterally on a raised-cosine profile whose
  progress is tied to distance travelled, so a crawling vehicle does not jump
  sideways. Until it is half way across it respects the leaders in both lanes.
* Vehicles next to a blocked merger drop back so a gap comes alongside, and
  vehicles in the target lane yield gently to the nearest merger ahead.
* A warning-area speed limit caps desired speeds from the warning-area start
  to the end of the downstream transition. Closed lanes reopen at the end of
  the termination area.
"""

from __future__ import annotations

import bisect
import math
from array import array
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import Region, TransitionStyle, VehicleTrack, WorkZoneLayout, validate_layout
from .errors import CollisionDetected, InvariantViolation, ValidationError

KMH = 1.0 / 3.6
VEHICLE_LENGTH = {"small": 4.5, "large": 12.0}


@dataclass(frozen=True)
class DrivingParams:
    cc0_standstill: float = 1.5
    cc1_headway: float = 0.7
    cc2_variation: float = 4.0
    diffusion_wait: float = 80.0
    min_headway: float = 0.5

    def __post_init__(self):
        bad = [k for k, v in self.__dict__.items() if not v > 0]
        if bad:
            raise ValidationError(f"driving parameters must be > 0: {bad}")


@dataclass(frozen=True)
class SpeedDistribution:
    control_points: tuple  # km/h, ascending
    cumulative: tuple  # nondecreasing, ends at 1

    def __post_init__(self):
        object.__setattr__(self, "control_points", tuple(float(x) for x in self.control_points))
        object.__setattr__(self, "cumulative", tuple(float(c) for c in self.cumulative))
        xs, cs = self.control_points, self.cumulative
        if len(xs) != len(cs) or len(xs) < 2:
            raise ValidationError("speed distribution needs matching control points and proportions")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValidationError("control points must be strictly ascending")
        if any(b < a for a, b in zip(cs, cs[1:])) or cs[0] < 0:
            raise ValidationError("cumulative proportions must be nondecreasing and >= 0")
        if abs(cs[-1] - 1.0) > 1e-9:
            raise ValidationError("cumulative proportions must end at 1")

    def at(self, speed_kmh: float) -> float:
        return float(np.interp(speed_kmh, self.control_points, self.cumulative))

    def mean(self) -> float:
        """Mean of the piecewise-uniform distribution (km/h)."""
        xs, cs = self.control_points, self.cumulative
        return cs[0] * xs[0] + sum((c1 - c0) * 0.5 * (x0 + x1) for x0, x1, c0, c1 in zip(xs, xs[1:], cs, cs[1:]))


def sample_desired_speed(dist: SpeedDistribution, u: float) -> float:
    """Inverse CDF with linear interpolation, clamped to the control-point range (km/h)."""
    xs, cs = dist.control_points, dist.cumulative
    if u <= cs[0]:
        return xs[0]
    i = bisect.bisect_left(cs, u)
    if i >= len(cs):
        return xs[-1]
    c0, c1 = cs[i - 1], cs[i]
    if c1 <= c0:
        return xs[i]
    return xs[i - 1] + (xs[i] - xs[i - 1]) * (u - c0) / (c1 - c0)


def _default_speeds():
    from .data import POSITION_A

    return {"small": POSITION_A["small"], "large": POSITION_A["large"]}


@dataclass(frozen=True)
class DemandConfig:
    volume: float = 1760.0
    large_fraction: float = 0.22
    desired_speed: dict = field(default_factory=_default_speeds)
    arrival: str = "poisson"

    def __post_init__(self):
        if self.volume < 0:
            raise ValidationError("volume must be >= 0")
        if not 0 <= self.large_fraction <= 1:
            raise ValidationError("large_fraction must lie in [0, 1]")
        missing = {"small", "large"} - set(self.desired_speed)
        if missing:
            raise ValidationError(f"desired speed distribution missing for {sorted(missing)}")
        if self.arrival != "poisson":
            raise ValidationError("only poisson arrivals are supported")


@dataclass(frozen=True)
class ModelConstants:
    """Fixed gains and behavioural constants of the simplified model."""

    k_gap: float = 0.25
    k_speed: float = 0.6
    k_free: float = 0.4
    a_max: float = 3.5
    b_max: float = 8.0
    dead_band_dv: float = 0.5  # m/s
    dead_band_speed: float = 10.0  # m/s at which the dead band reaches full width
    safety_engage: float = 1.0  # m/s^2 of required braking before the kinematic term acts
    lane_change_duration: float = 3.0
    min_lane_change_duration: float = 2.0
    min_lane_change_distance: float = 15.0
    max_lane_change_duration: float = 6.0
    accept_decel: float = 3.0
    urgent_accept_decel: float = 4.5
    discretionary_accept_decel: float = 2.0
    yield_decel: float = 1.5
    seek_decel: float = 1.0
    seek_min_speed: float = 3.0
    seek_speed_margin: float = 2.0
    lane_change_accel: float = 1.0
    yield_range: float = 60.0
    notice_distance: tuple = (30.0, 250.0)
    compliance_factor: float = 1.0
    downstream_length: float = 300.0
    blocked_speed: float = 0.5


@dataclass(frozen=True)
class ScenarioConfig:
    layout: WorkZoneLayout = field(default_factory=WorkZoneLayout)
    demand: DemandConfig = field(default_factory=DemandConfig)
    driving: DrivingParams = field(default_factory=DrivingParams)
    warning_speed_limit: Optional[float] = None
    sim_duration: float = 3600.0
    warmup: float = 120.0
    step_dt: float = 0.1
    seed: int = 1
    replications: int = 3
    model: ModelConstants = field(default_factory=ModelConstants)
    detector_positions: Optional[tuple] = None

    def __post_init__(self):
        problems = validate_layout(self.layout)
        if problems:
            raise ValidationError("; ".join(problems))
        if not any(abs(self.step_dt - ok) < 1e-12 for ok in (0.05, 0.1)):
            raise ValidationError("step_dt must be 0.05 or 0.1")
        if self.replications < 1:
            raise ValidationError("replications must be >= 1")
        if self.sim_duration < 0 or self.warmup < 0:
            raise ValidationError("durations must be >= 0")

    @property
    def effective_layout(self) -> WorkZoneLayout:
        if self.warning_speed_limit is not None:
            return self.layout.replace(warning_speed_limit=self.warning_speed_limit)
        return self.layout

    @property
    def detectors(self) -> tuple:
        if self.detector_positions is not None:
            return tuple(self.detector_positions)
        lay = self.layout
        work = lay.region_span(Region.WORK)
        return (max(0.0, lay.zone_start_x - 400.0), 0.5 * (work[0] + work[1]))

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


class Vehicle:
    """Mutable per-vehicle state (also used as the public ``VehicleState``)."""

    __slots__ = ("id", "cls", "length", "lane", "s", "v", "a", "desired_v", "notice",
                 "lc_from", "lc_to", "lc_progress", "lc_distance", "wait_timer",
                 "tt", "tx", "ty", "tv", "tl")

    def __init__(self, id, cls="small", lane=0, s=0.0, v=0.0, desired_v=25.0, notice=math.inf,
                 length=None, a=0.0):
        self.id = id
        self.cls = cls
        self.length = VEHICLE_LENGTH.get(cls, 4.5) if length is None else length
        self.lane = lane
        self.s = s
        self.v = v
        self.a = a
        self.desired_v = desired_v
        self.notice = notice
        self.lc_from = None
        self.lc_to = None
        self.lc_progress = 0.0
        self.lc_distance = 0.0
        self.wait_timer = 0.0
        self.tt = self.tx = self.ty = self.tv = self.tl = None

    @property
    def changing(self) -> bool:
        return self.lc_to is not None

    @property
    def lane_change(self):
        if self.lc_to is None:
            return None
        return (self.lc_to, self.lc_progress)

    def lateral(self, lane_width: float) -> float:
        if self.lc_to is None:
            return (self.lane + 0.5) * lane_width
        p = min(self.lc_progress, 1.0)
        frac = 0.5 * (1.0 - math.cos(math.pi * p))
        return (self.lc_from + 0.5 + (self.lc_to - self.lc_from) * frac) * lane_width

    def __repr__(self):
        return f"Vehicle({self.id!r}, lane={self.lane}, s={self.s:.2f}, v={self.v:.2f})"


VehicleState = Vehicle


class _Obstacle:
    """Stationary zero-length leader standing for the end of a closed lane."""

    __slots__ = ("s", "v", "length")

    def __init__(self, s):
        self.s = s
        self.v = 0.0
        self.length = 0.0


def follow_accel(me, leader, params: DrivingParams, model: ModelConstants = ModelConstants(),
                 desired_v: Optional[float] = None) -> float:
    """Acceleration of ``me`` behind ``leader`` (``None`` = free road).

    Inside the following regime the law is ``k_gap * e + k_speed * dv`` with
    ``e`` the error against the desired gap ``cc0 + cc1 * v``; a dead band of
    half-width ``cc2 / 2`` (shrinking to zero at standstill) suppresses
    oscillation. A kinematic braking term prevents running into the leader.
    """
    v = me.v
    desired = me.desired_v if desired_v is None else desired_v
    a_free = model.k_free * (desired - v)
    if leader is None:
        return min(max(a_free, -model.b_max), model.a_max)
    gap = leader.s - leader.length - me.s
    dv = leader.v - v
    g_star = params.cc0_standstill + params.cc1_headway * v
    closing = -dv if dv < 0 else 0.0
    if gap < g_star + params.cc2_variation + closing * closing / (2.0 * model.accept_decel):
        e = gap - g_star
        band = 0.5 * params.cc2_variation * min(1.0, v / model.dead_band_speed)
        if abs(e) <= band and abs(dv) < model.dead_band_dv:
            a = 0.0
        else:
            a = model.k_gap * e + model.k_speed * dv
        a = min(a, a_free)
    else:
        a = a_free
    if dv < 0:
        room = gap - params.cc0_standstill
        need = (v * v - leader.v * leader.v) / (2.0 * max(room, 0.05))
        e0 = model.safety_engage
        # continuous in need: -need above the engagement level, fading out linearly below it
        a_safe = -need if need >= e0 else 3.0 * e0 - 4.0 * need
        a = min(a, a_safe)
    return min(max(a, -model.b_max), model.a_max)


def gaps_acceptable(me, front, rear, params: DrivingParams, accept_decel: float, v_me: Optional[float] = None) -> bool:
    """Gap test for moving alongside ``front`` and ahead of ``rear`` in a target lane."""
    v = me.v if v_me is None else v_me
    cc0 = params.cc0_standstill
    if front is not None:
        fgap = front.s - front.length - me.s
        if fgap < params.min_headway:
            return False
        if v > front.v:
            room = fgap - cc0
            if room <= 0 or (v * v - front.v * front.v) / (2 * room) > accept_decel:
                return False
    if rear is not None:
        rgap = me.s - me.length - rear.s
        if rgap < cc0 + params.cc1_headway * rear.v:
            return False
        if rear.v > v:
            room = rgap - cc0
            if room <= 0 or (rear.v * rear.v - v * v) / (2 * room) > accept_decel:
                return False
    return True


def lane_end_positions(layout: WorkZoneLayout) -> dict:
    """x by which each closed lane must have been vacated."""
    x_t = layout.transition_start_x
    length = layout.upstream_transition_length
    open_lanes = layout.open_lanes
    closed = sorted(layout.closed_lanes, key=lambda k: -min(abs(k - o) for o in open_lanes))
    n = len(closed)
    shift = 1 if layout.upstream_transition_style is TransitionStyle.GRADUAL else 0
    return {k: x_t + length * (rank + shift) / n for rank, k in enumerate(closed)}


def merge_direction(lane: int, layout: WorkZoneLayout) -> int:
    nearest = min(layout.open_lanes, key=lambda o: (abs(o - lane), o))
    return 1 if nearest > lane else -1


def lane_end_noticed(me, end: float, layout: WorkZoneLayout, params: DrivingParams,
                     model: ModelConstants = ModelConstants()) -> bool:
    """Whether a driver in a closed lane is aware of the closure ahead.

    Awareness starts at the driver's notice distance before the transition, and
    never later than an urgent stopping distance before the lane end.
    """
    if me.s < layout.zone_start_x:
        return False
    if me.s >= layout.transition_start_x - me.notice:
        return True
    stop = me.v * me.v / (2.0 * model.urgent_accept_decel) + params.cc0_standstill + 5.0
    return end - me.s <= stop


def lane_change_decision(me, front, rear, layout: WorkZoneLayout, params: DrivingParams,
                         model: ModelConstants = ModelConstants()):
    """Mandatory-merge decision for a vehicle in a closed lane.

    ``front``/``rear`` are the neighbours in the lane toward the open lanes.
    Returns ``None`` (stay) or ``(target_lane, duration_s)``.
    """
    if me.changing or me.lane not in layout.closed_lanes:
        return None
    ends = lane_end_positions(layout)
    end = ends[me.lane]
    if me.s >= layout.region_span(Region.TERMINATION)[0]:
        return None
    if not lane_end_noticed(me, end, layout, params, model):
        return None
    room = max(end - me.s, 0.0)
    urgent = room < 2.0 * model.lane_change_duration * max(me.v, 1.0)
    accept = model.urgent_accept_decel if urgent else model.accept_decel
    if not gaps_acceptable(me, front, rear, params, accept):
        return None
    duration = min(max(room / max(me.v, 0.1), model.min_lane_change_duration), model.lane_change_duration)
    return me.lane + merge_direction(me.lane, layout), duration


def update_wait_timer(timer: float, v: float, blocked: bool, dt: float, model: ModelConstants = ModelConstants()) -> float:
    if blocked and v < model.blocked_speed:
        return timer + dt
    return 0.0


def diffusion_removal(timer: float, params: DrivingParams) -> bool:
    return timer >= params.diffusion_wait - 1e-9


@dataclass
class DetectorRecord:
    position: float
    t: list = field(default_factory=list)
    vehicle_id: list = field(default_factory=list)
    vehicle_class: list = field(default_factory=list)
    speed_kmh: list = field(default_factory=list)

    def speeds(self, cls: Optional[str] = None) -> np.ndarray:
        values = [s for s, c in zip(self.speed_kmh, self.vehicle_class) if cls is None or c == cls]
        return np.array(values, dtype=float)


@dataclass
class SimStats:
    injected: int = 0
    exited: int = 0
    exited_after_warmup: int = 0
    removed: int = 0
    lane_changes: int = 0
    mandatory_changes: int = 0
    max_queue: int = 0
    steps: int = 0


@dataclass
class SimResult:
    tracks: list
    detectors: list
    stats: SimStats
    config: ScenarioConfig
    seed: int

    @property
    def throughput(self) -> float:
        """Vehicles leaving the network per hour after warmup."""
        if self.config.sim_duration <= 0:
            return 0.0
        return self.stats.exited_after_warmup * 3600.0 / self.config.sim_duration


class World:
    """One replication of a scenario."""

    def __init__(self, config: ScenarioConfig, seed: Optional[int] = None, check: bool = False):
        self.cfg = config
        self.layout = config.effective_layout
        self.params = config.driving
        self.model = config.model
        self.dt = config.step_dt
        self.seed = config.seed if seed is None else seed
        self.rng = np.random.default_rng(self.seed)
        self.check = check
        lay = self.layout
        self.n_lanes = lay.lane_count
        self.width = lay.lane_width
        self.lane_end = lane_end_positions(lay)
        # the limit is lifted where the termination area begins; closed lanes
        # only become available again once it has been passed
        self.limit_end_x = lay.region_span(Region.TERMINATION)[0]
        self.reopen_x = lay.zone_end_x
        self.warning_start = lay.zone_start_x
        self.network_end = lay.zone_end_x + self.model.downstream_length
        limit = lay.warning_speed_limit
        self.limit_ms = None if limit is None else limit * KMH * self.model.compliance_factor
        self.vehicles: list[Vehicle] = []
        self.queues = [[] for _ in range(self.n_lanes)]
        rate = config.demand.volume / 3600.0 / self.n_lanes
        self.lane_rate = rate
        self.next_arrival = [self._interarrival() for _ in range(self.n_lanes)]
        self.detectors = [DetectorRecord(p) for p in config.detectors]
        self.stats = SimStats()
        self.finished: list[VehicleTrack] = []
        self.k = 0
        self._next_id = 0
        self.lanes: list[list[Vehicle]] = []
        self.lane_s: list[list[float]] = []
        self.ghosts: list[list[Vehicle]] = []
        self.seeking: dict = {}

    # arrivals -----------------------------------------------------------------

    def _interarrival(self) -> float:
        if self.lane_rate <= 0:
            return math.inf
        return float(self.rng.exponential(1.0 / self.lane_rate))

    def _spawn_due(self, t: float) -> None:
        demand = self.cfg.demand
        lo, hi = self.model.notice_distance
        for lane in range(self.n_lanes):
            while self.next_arrival[lane] <= t:
                cls = "large" if self.rng.random() < demand.large_fraction else "small"
                desired = sample_desired_speed(demand.desired_speed[cls], float(self.rng.random())) * KMH
                notice = lo + (hi - lo) * float(self.rng.random())
                self._next_id += 1
                veh = Vehicle(f"{self._next_id}", cls, lane, 0.0, desired, desired, notice)
                self.queues[lane].append(veh)
                self.next_arrival[lane] += self._interarrival()
        waiting = sum(len(q) for q in self.queues)
        self.stats.max_queue = max(self.stats.max_queue, waiting)

    def _insert(self, t: float) -> None:
        p = self.params
        for lane in range(self.n_lanes):
            queue = self.queues[lane]
            while queue:
                veh = queue[0]
                last = None
                for other in self.vehicles:
                    if other.lane == lane and (last is None or other.s < last.s):
                        last = other
                v_ins = veh.desired_v
                if last is not None:
                    gap = last.s - last.length
                    if v_ins > last.v:
                        slow = (v_ins * v_ins - last.v * last.v) / (2 * self.model.accept_decel)
                        if gap < p.cc0_standstill + p.cc1_headway * v_ins + slow:
                            v_ins = last.v
                    if gap < p.cc0_standstill + p.cc1_headway * v_ins:
                        break
                queue.pop(0)
                veh.v = v_ins
                veh.s = 0.0
                veh.tt, veh.tx, veh.ty, veh.tv, veh.tl = array("d"), array("d"), array("d"), array("d"), array("i")
                self.vehicles.append(veh)
                self.stats.injected += 1
                self._record(veh, t)
                break  # at most one insertion per lane and step

    # lane bookkeeping -----------------------------------------------------------

    def _index(self) -> None:
        lanes = [[] for _ in range(self.n_lanes)]
        ghosts = [[] for _ in range(self.n_lanes)]
        for veh in self.vehicles:
            lanes[veh.lane].append(veh)
            if veh.lc_to is not None and veh.lc_progress < 0.5:
                ghosts[veh.lc_from].append(veh)
        for lane in lanes:
            lane.sort(key=lambda u: u.s)
        self.lanes = lanes
        self.lane_s = [[u.s for u in lane] for lane in lanes]
        self.ghosts = ghosts

    def _neighbours(self, lane: int, s: float, exclude=None):
        """Nearest vehicles ahead (s' > s) and behind (s' <= s) in ``lane``."""
        vs = self.lanes[lane]
        ss = self.lane_s[lane]
        i = bisect.bisect_right(ss, s)
        front = None
        j = i
        while j < len(vs):
            if vs[j] is not exclude:
                front = vs[j]
                break
            j += 1
        rear = None
        j = i - 1
        while j >= 0:
            if vs[j] is not exclude:
                rear = vs[j]
                break
            j -= 1
        for g in self.ghosts[lane]:
            if g is exclude:
                continue
            if g.s > s and (front is None or g.s - g.length < front.s - front.length):
                front = g
            elif g.s <= s and (rear is None or g.s > rear.s):
                rear = g
        return front, rear

    def _move_lane(self, veh: Vehicle, target: int, duration: float) -> None:
        old = veh.lane
        i = self.lanes[old].index(veh)
        del self.lanes[old][i]
        del self.lane_s[old][i]
        j = bisect.bisect_right(self.lane_s[target], veh.s)
        self.lanes[target].insert(j, veh)
        self.lane_s[target].insert(j, veh.s)
        self.ghosts[old].append(veh)
        veh.lc_from, veh.lc_to = old, target
        veh.lc_progress = 0.0
        veh.lc_distance = max(veh.v * duration, self.model.min_lane_change_distance)
        veh.lane = target
        self.stats.lane_changes += 1

    def _lane_usable(self, lane: int, s: float) -> bool:
        return lane not in self.lane_end or s >= self.reopen_x

    def _desired(self, veh: Vehicle) -> float:
        if self.limit_ms is not None and self.warning_start <= veh.s < self.limit_end_x:
            return min(veh.desired_v, self.limit_ms)
        return veh.desired_v

    def _lane_changes(self) -> None:
        lay, p, m = self.layout, self.params, self.model
        self.seeking = {}
        for veh in sorted(self.vehicles, key=lambda u: -u.s):
            if veh.lc_to is not None:
                continue
            lane = veh.lane
            if lane in self.lane_end and veh.s < self.reopen_x:
                target = lane + merge_direction(lane, lay)
                front, rear = self._neighbours(target, veh.s, exclude=veh)
                decision = lane_change_decision(veh, front, rear, lay, p, m)
                if decision is not None:
                    self._move_lane(veh, decision[0], decision[1])
                    self.stats.mandatory_changes += 1
                elif veh.s < self.lane_end[lane] and lane_end_noticed(veh, self.lane_end[lane], lay, p, m):
                    alongside = [u.v for u in (front, rear) if u is not None]
                    if alongside:
                        self.seeking[veh.id] = min(alongside) - m.seek_speed_margin
                continue
            if (self.k + int(veh.id)) % 10:
                continue
            self._discretionary(veh)

    def _discretionary(self, veh: Vehicle) -> None:
        desired = self._desired(veh)
        if veh.v > desired - 2.0 or veh.a > 0.5:
            return
        front, _ = self._neighbours(veh.lane, veh.s, exclude=veh)
        if front is None or front.s - front.length - veh.s > 80.0 or front.v > desired - 2.0:
            return
        best = None
        for target in (veh.lane + 1, veh.lane - 1):
            if not 0 <= target < self.n_lanes or not self._lane_usable(target, veh.s):
                continue
            if target in self.lane_end and veh.s < self.reopen_x:
                continue
            t_front, t_rear = self._neighbours(target, veh.s, exclude=veh)
            ahead_v = desired if t_front is None or t_front.s - t_front.length - veh.s > 80.0 else t_front.v
            if ahead_v < front.v + 2.0:
                continue
            if not gaps_acceptable(veh, t_front, t_rear, self.params, self.model.discretionary_accept_decel):
                continue
            if best is None or ahead_v > best[1]:
                best = (target, ahead_v)
        if best is not None:
            self._move_lane(veh, best[0], self.model.lane_change_duration)

    # dynamics -------------------------------------------------------------------

    def _mergers(self) -> list[list[Vehicle]]:
        """Per lane, the vehicles waiting to merge into it, ordered by position."""
        out = [[] for _ in range(self.n_lanes)]
        for lane, end in self.lane_end.items():
            target = lane + merge_direction(lane, self.layout)
            for veh in self.lanes[lane]:
                if veh.lc_to is None and veh.s < end and lane_end_noticed(veh, end, self.layout, self.params, self.model):
                    out[target].append(veh)
        return out

    def _accelerations(self) -> list[float]:
        p, m = self.params, self.model
        mergers = self._mergers()
        out = []
        for veh in self.vehicles:
            front, _ = self._neighbours(veh.lane, veh.s, exclude=veh)
            end = self.lane_end.get(veh.lane)
            if end is not None and veh.s < end and lane_end_noticed(veh, end, self.layout, p, m):
                if front is None or front.s - front.length > end:
                    front = _Obstacle(end)
            a = follow_accel(veh, front, p, m, self._desired(veh))
            if veh.lc_to is not None and veh.lc_progress < 0.5:
                # still straddling both lanes: respect whichever leader binds harder
                old_front, _ = self._neighbours(veh.lc_from, veh.s, exclude=veh)
                if old_front is not None:
                    a = min(a, follow_accel(veh, old_front, p, m, self._desired(veh)))
            if veh.lc_to is not None:
                a = min(a, m.lane_change_accel)
            elif veh.id in self.seeking:
                # drift back relative to the target lane so a gap comes alongside
                target_v = max(self.seeking[veh.id], m.seek_min_speed)
                a = min(a, max(m.k_free * (target_v - veh.v), -m.seek_decel))
            if mergers[veh.lane] and veh.lc_to is None:
                a = min(a, self._yield(veh, front, mergers[veh.lane]))
            out.append(a)
        return out

    def _yield(self, veh: Vehicle, front, mergers: list) -> float:
        """Courtesy deceleration that opens a gap for the nearest merger ahead."""
        m = self.model
        for other in mergers:
            if other.s <= veh.s or other.s - other.length - veh.s <= 0:
                continue
            if other.s - veh.s > m.yield_range:
                break
            if front is not None and front.s <= other.s:
                break
            a = follow_accel(veh, other, self.params, m, self._desired(veh))
            return a if a >= -m.yield_decel else math.inf
        return math.inf

    def _record(self, veh: Vehicle, t: float) -> None:
        if t < self.cfg.warmup - 1e-9:
            return
        veh.tt.append(t)
        veh.tx.append(veh.s)
        veh.ty.append(veh.lateral(self.width))
        veh.tv.append(veh.v)
        veh.tl.append(veh.lane)

    def _finish(self, veh: Vehicle) -> None:
        if len(veh.tt):
            self.finished.append(VehicleTrack(
                veh.id, veh.cls, np.frombuffer(veh.tt, dtype=float).copy(),
                np.frombuffer(veh.tx, dtype=float).copy(), np.frombuffer(veh.ty, dtype=float).copy(),
                np.frombuffer(veh.tv, dtype=float).copy(), np.frombuffer(veh.tl, dtype=np.int32).astype(int),
                sample_rate_hz=1.0 / self.dt))

    def step(self) -> None:
        dt = self.dt
        t_now = round(self.k * dt, 9)
        t_next = round((self.k + 1) * dt, 9)
        self._index()
        self._lane_changes()
        accs = self._accelerations()
        keep = []
        for veh, a in zip(self.vehicles, accs):
            s_old = veh.s
            veh.a = a
            veh.v = max(veh.v + a * dt, 0.0)
            veh.s = s_old + veh.v * dt
            if veh.lc_to is not None:
                veh.lc_progress += max(veh.v * dt / veh.lc_distance, dt / self.model.max_lane_change_duration)
                if veh.lc_progress >= 1.0 - 1e-9:
                    veh.lc_from = veh.lc_to = None
                    veh.lc_progress = veh.lc_distance = 0.0
            for det in self.detectors:
                if s_old < det.position <= veh.s:
                    frac = (det.position - s_old) / (veh.s - s_old)
                    det.t.append(t_now + frac * dt)
                    det.vehicle_id.append(veh.id)
                    det.vehicle_class.append(veh.cls)
                    det.speed_kmh.append(veh.v / KMH)
            blocked = veh.lane in self.lane_end and veh.s < self.reopen_x
            veh.wait_timer = update_wait_timer(veh.wait_timer, veh.v, blocked, dt, self.model)
            if veh.s >= self.network_end:
                self._record(veh, t_next)
                self.stats.exited += 1
                if t_next > self.cfg.warmup + 1e-9:
                    self.stats.exited_after_warmup += 1
                self._finish(veh)
                continue
            if blocked and diffusion_removal(veh.wait_timer, self.params):
                self._record(veh, t_next)
                self.stats.removed += 1
                self._finish(veh)
                continue
            self._record(veh, t_next)
            keep.append(veh)
        self.vehicles = keep
        self.k += 1
        self.stats.steps = self.k
        self._spawn_due(t_next)
        self._insert(t_next)
        if self.check:
            self.check_invariants()

    def check_invariants(self) -> None:
        st = self.stats
        if st.injected != st.exited + len(self.vehicles) + st.removed:
            raise InvariantViolation(
                f"conservation broken at step {self.k}: injected {st.injected} != exited {st.exited}"
                f" + on network {len(self.vehicles)} + removed {st.removed}")
        work_lo, work_hi = self.layout.region_span(Region.WORK)
        by_lane = [[] for _ in range(self.n_lanes)]
        for veh in self.vehicles:
            if veh.v < 0:
                raise InvariantViolation(f"negative speed for vehicle {veh.id}")
            if veh.lane in self.layout.closed_lanes and work_lo <= veh.s < work_hi:
                raise InvariantViolation(f"vehicle {veh.id} in closed lane {veh.lane} inside the work area")
            by_lane[veh.lane].append(veh)
        for lane in by_lane:
            lane.sort(key=lambda u: u.s)
            for rear, front in zip(lane, lane[1:]):
                if front.s - front.length - rear.s <= 0:
                    raise CollisionDetected(
                        f"vehicles {rear.id} and {front.id} overlap in lane {rear.lane} at step {self.k}")

    def run(self) -> SimResult:
        total = self.cfg.warmup + self.cfg.sim_duration
        n_steps = int(round(total / self.dt))
        self._spawn_due(0.0)
        self._insert(0.0)
        for _ in range(n_steps):
            self.step()
        for veh in self.vehicles:
            self._finish(veh)
        tracks = sorted(self.finished, key=lambda tr: int(tr.vehicle_id))
        return SimResult(tracks, self.detectors, self.stats, self.cfg, self.seed)


def run_replication(config: ScenarioConfig, replication: int = 0, check: bool = False) -> SimResult:
    """Replication ``r`` runs with seed ``config.seed + r``."""
    return World(config, seed=config.seed + replication, check=check).run()


def run_scenario(config: ScenarioConfig, check: bool = False) -> list[SimResult]:
    return [run_replication(config, r, check) for r in range(config.replications)]
