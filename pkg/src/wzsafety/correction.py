"""Safety correction matrix and the assess / adjust / reassess loop."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .classify import BehaviorLabel
from .core import RegionGroup, TransitionStyle, WorkZoneLayout
from .density import AssessmentReport
from .errors import Clamped, NoApplicableAction, ValidationError

SPEED_STEP = 10.0  # km/h
LENGTH_STEP = 30.0  # m

DECELERATION = 1  # upstream L&A / L&D
LANE_CHANGE = 2  # upstream TL&CL / TR&CL
TERMINATION = 3  # termination-area acceleration
PRIORITY = (DECELERATION, TERMINATION, LANE_CHANGE)


@dataclass(frozen=True)
class SafetyThresholds:
    """Maximum acceptable peak density per problem. The defaults are illustrative only."""

    deceleration: float = 3.0
    lane_change: float = 3.0
    termination: float = 3.0

    def __post_init__(self):
        for name in ("deceleration", "lane_change", "termination"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"threshold '{name}' must be > 0")

    def for_flag(self, index: int) -> float:
        return {DECELERATION: self.deceleration, LANE_CHANGE: self.lane_change, TERMINATION: self.termination}[index]


@dataclass(frozen=True)
class Bounds:
    min_limit: float = 40.0
    road_limit: float = 80.0
    min_transition: float = 30.0
    max_transition: float = 120.0


@dataclass(frozen=True)
class ProblemFlag:
    index: int
    label: str
    group: str
    density: float
    threshold: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class ActionKind(str, enum.Enum):
    RAISE_LIMIT = "RaiseWarningLimit"
    SWITCH_TO_GRADUAL = "SwitchTransitionToGradual"
    LENGTHEN_TRANSITION = "LengthenTransition"
    LOWER_LIMIT = "LowerWarningLimit"


@dataclass(frozen=True)
class CorrectionAction:
    kind: ActionKind
    flag: int

    @property
    def step(self) -> Optional[float]:
        return {ActionKind.RAISE_LIMIT: SPEED_STEP, ActionKind.LOWER_LIMIT: -SPEED_STEP,
                ActionKind.LENGTHEN_TRANSITION: LENGTH_STEP}.get(self.kind)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "flag": self.flag, "step": self.step}


_LABELS = {
    DECELERATION: ((BehaviorLabel.LA, RegionGroup.UPSTREAM), (BehaviorLabel.LD, RegionGroup.UPSTREAM)),
    LANE_CHANGE: ((BehaviorLabel.TLCL, RegionGroup.UPSTREAM), (BehaviorLabel.TRCL, RegionGroup.UPSTREAM)),
    # the matrix names deceleration here while the scenario results show acceleration; both count
    TERMINATION: ((BehaviorLabel.LA, RegionGroup.TERMINATION), (BehaviorLabel.LD, RegionGroup.TERMINATION)),
}


def problem_density(report: AssessmentReport, index: int) -> tuple[float, BehaviorLabel]:
    """Highest density among the labels watched by problem ``index`` and the label that holds it."""
    best = (0.0, _LABELS[index][0][0])
    for label, group in _LABELS[index]:
        d = report.density(label, group)
        if d > best[0]:
            best = (d, label)
    return best


def assess(report: AssessmentReport, thresholds: SafetyThresholds = SafetyThresholds()) -> list[ProblemFlag]:
    flags = []
    for index in (DECELERATION, LANE_CHANGE, TERMINATION):
        density, label = problem_density(report, index)
        limit = thresholds.for_flag(index)
        if density > limit:
            group = _LABELS[index][0][1]
            flags.append(ProblemFlag(index, label.value, group.value, density, limit))
    return flags


def _current_limit(layout: WorkZoneLayout) -> Optional[float]:
    return layout.warning_speed_limit


def apply(layout: WorkZoneLayout, action: CorrectionAction, bounds: Bounds = Bounds()) -> WorkZoneLayout:
    """Layout with the single adjustment; raises ``Clamped`` when it would leave the bounds."""
    kind = action.kind
    if kind is ActionKind.SWITCH_TO_GRADUAL:
        if layout.upstream_transition_style is TransitionStyle.GRADUAL:
            raise Clamped("transition is already gradual")
        return layout.replace(upstream_transition_style=TransitionStyle.GRADUAL)
    if kind is ActionKind.LENGTHEN_TRANSITION:
        new = layout.upstream_transition_length + LENGTH_STEP
        if new > bounds.max_transition + 1e-9:
            raise Clamped(f"transition length {new:g} m exceeds {bounds.max_transition:g} m")
        return layout.replace(upstream_transition_length=new)
    limit = _current_limit(layout)
    if kind is ActionKind.RAISE_LIMIT:
        if limit is None:
            raise Clamped("no warning-area limit to raise")
        new = limit + SPEED_STEP
        if new > bounds.road_limit + 1e-9:
            raise Clamped(f"warning limit {new:g} km/h exceeds the road limit {bounds.road_limit:g}")
        return layout.replace(warning_speed_limit=new)
    if kind is ActionKind.LOWER_LIMIT:
        new = (bounds.road_limit if limit is None else limit) - SPEED_STEP
        if new < bounds.min_limit - 1e-9:
            raise Clamped(f"warning limit {new:g} km/h is below {bounds.min_limit:g}")
        return layout.replace(warning_speed_limit=new)
    raise ValidationError(f"unknown action {kind}")


def _applicable(layout: WorkZoneLayout, action: CorrectionAction, bounds: Bounds) -> bool:
    try:
        apply(layout, action, bounds)
    except Clamped:
        return False
    return True


def recommend(flags: list[ProblemFlag], layout: WorkZoneLayout, bounds: Bounds = Bounds()) -> list[CorrectionAction]:
    """Candidate actions in flag priority order, clamped-out ones dropped.

    A limit raise and a limit cut cannot both stand; the one requested by the
    higher-priority flag wins.
    """
    if not flags:
        raise ValidationError("recommend needs at least one flag")
    raised = set(f.index for f in flags)
    out: list[CorrectionAction] = []
    limit_direction = None
    for index in PRIORITY:
        if index not in raised:
            continue
        if index == DECELERATION:
            wanted = [CorrectionAction(ActionKind.RAISE_LIMIT, index)]
            if layout.upstream_transition_style is TransitionStyle.STEPPED:
                wanted.append(CorrectionAction(ActionKind.SWITCH_TO_GRADUAL, index))
        elif index == LANE_CHANGE:
            lengthen = CorrectionAction(ActionKind.LENGTHEN_TRANSITION, index)
            wanted = [lengthen] if _applicable(layout, lengthen, bounds) else [
                CorrectionAction(ActionKind.LOWER_LIMIT, index)]
        else:
            wanted = [CorrectionAction(ActionKind.LOWER_LIMIT, index)]
        for action in wanted:
            if not _applicable(layout, action, bounds):
                continue
            if action.kind in (ActionKind.RAISE_LIMIT, ActionKind.LOWER_LIMIT):
                if limit_direction is not None:
                    continue
                limit_direction = action.kind
            out.append(action)
    if not out:
        raise NoApplicableAction("every corrective action is out of bounds")
    return out


@dataclass
class Iteration:
    layout: WorkZoneLayout
    report: AssessmentReport
    flags: list
    action: Optional[CorrectionAction]

    def to_dict(self) -> dict:
        return {"layout": layout_to_dict(self.layout), "report": self.report.to_dict(),
                "flags": [f.to_dict() for f in self.flags],
                "action": None if self.action is None else self.action.to_dict()}


@dataclass
class LoopResult:
    history: list = field(default_factory=list)
    verdict: str = "unresolved"

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "iterations": [it.to_dict() for it in self.history]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def layout_to_dict(layout: WorkZoneLayout) -> dict:
    out = {}
    for key, value in layout.__dict__.items():
        if isinstance(value, frozenset):
            value = sorted(value)
        elif isinstance(value, enum.Enum):
            value = value.value
        out[key] = value
    return out


def correction_loop(initial, thresholds: SafetyThresholds = SafetyThresholds(), max_iters: int = 5,
                    analysis=None, bounds: Bounds = Bounds(), model=None, assess_fn=None) -> LoopResult:
    """Simulate, assess and adjust one field at a time until no flag remains.

    ``assess_fn`` maps a scenario to its report and defaults to simulating it.
    """
    from .pipeline import AnalysisConfig, simulate_and_assess

    if max_iters < 0:
        raise ValidationError("max_iters must be >= 0")
    analysis = AnalysisConfig() if analysis is None else analysis
    if assess_fn is None:
        def assess_fn(cfg):
            return simulate_and_assess(cfg, analysis, model)[0]

    result = LoopResult()
    scenario = initial
    if scenario.warning_speed_limit is not None:
        # the loop edits the layout, so the limit lives there
        scenario = scenario.replace(layout=scenario.effective_layout, warning_speed_limit=None)
    for _ in range(max_iters):
        report = assess_fn(scenario)
        flags = assess(report, thresholds)
        if not flags:
            result.history.append(Iteration(scenario.layout, report, flags, None))
            result.verdict = "safe"
            return result
        try:
            action = recommend(flags, scenario.layout, bounds)[0]
        except NoApplicableAction:
            result.history.append(Iteration(scenario.layout, report, flags, None))
            return result
        result.history.append(Iteration(scenario.layout, report, flags, action))
        scenario = scenario.replace(layout=apply(scenario.layout, action, bounds))
    return result


def thresholds_from_dict(data) -> SafetyThresholds:
    values = {k: (math.inf if v is None else float(v)) for k, v in dict(data).items()}
    return SafetyThresholds(**values)
