"""Orthogonal-design calibration of the five driving parameters.

Each of the 16 design rows is simulated, the spot speeds at the in-zone
detector are compared with site observations through two indicators (``p1``
on the cumulative speed distributions, ``p2`` on the class means), and the
best level of every factor is the one with the lowest mean indicator over the
four rows that use it. A confirmation run with the best combination is then
scored measure by measure with the relative error ``xi``.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .data import (CONTROL_POINTS, FACTOR_LEVELS, FACTOR_NAMES, L16, POSITION_B, POSITION_B_MEANS)
from .errors import IncompleteRuns, MismatchedControlPoints, ValidationError, ZeroReference
from .microsim import DrivingParams, ScenarioConfig, SpeedDistribution, run_replication

CLASSES = ("small", "large")
XI_LIMIT = 10.0
XI_CONFIDENCE = 0.90


@dataclass(frozen=True)
class FactorLevels:
    names: tuple = FACTOR_NAMES
    levels: tuple = FACTOR_LEVELS

    def __post_init__(self):
        if len(self.names) != 5 or len(self.levels) != 5 or any(len(lv) != 4 for lv in self.levels):
            raise ValidationError("calibration needs exactly 5 factors with 4 levels each")

    def params(self, row: Sequence[int]) -> DrivingParams:
        """Driving parameters for a row of 1-based level indices."""
        return DrivingParams(**{n: float(lv[i - 1]) for n, lv, i in zip(self.names, self.levels, row)})


def l16_design() -> list[tuple[int, ...]]:
    return [tuple(row) for row in L16]


@dataclass(frozen=True)
class SpeedObservation:
    """Spot-speed summary at one cross-section: distributions per class and means (km/h)."""

    small: SpeedDistribution
    large: SpeedDistribution
    means: tuple  # small, large, all

    def __post_init__(self):
        if self.small is None or self.large is None:
            raise ValidationError("both small and large speed distributions are required")
        if len(self.means) != 3:
            raise ValidationError("means must hold (small, large, all)")
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))

    def distribution(self, cls: str) -> SpeedDistribution:
        return self.small if cls == "small" else self.large

    @classmethod
    def site(cls) -> "SpeedObservation":
        return cls(POSITION_B["small"], POSITION_B["large"], POSITION_B_MEANS)

    @classmethod
    def from_speeds(cls, small, large, control_points=CONTROL_POINTS) -> "SpeedObservation":
        small = np.asarray(small, dtype=float)
        large = np.asarray(large, dtype=float)
        if len(small) == 0 or len(large) == 0:
            raise ValidationError("no spot speeds recorded for one of the vehicle classes")
        every = np.concatenate([small, large])
        return cls(empirical_distribution(small, control_points), empirical_distribution(large, control_points),
                   (small.mean(), large.mean(), every.mean()))

    def to_dict(self) -> dict:
        return {c: {"control_points": list(self.distribution(c).control_points),
                    "cumulative": list(self.distribution(c).cumulative)} for c in CLASSES} | {
            "means": list(self.means)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "SpeedObservation":
        for key in ("small", "large", "means"):
            if key not in data:
                raise ValidationError(f"observation is missing '{key}'")
        dists = {c: SpeedDistribution(data[c]["control_points"], data[c]["cumulative"]) for c in CLASSES}
        return cls(dists["small"], dists["large"], tuple(data["means"]))


def empirical_distribution(speeds, control_points=CONTROL_POINTS) -> SpeedDistribution:
    """Share of speeds at or below each control point; anything faster is lumped into the last one."""
    s = np.sort(np.asarray(speeds, dtype=float))
    cum = [np.searchsorted(s, x, side="right") / len(s) for x in control_points]
    cum[-1] = 1.0
    return SpeedDistribution(tuple(control_points), tuple(float(c) for c in cum))


def p1(sim: SpeedDistribution, actual: SpeedDistribution, mode: str = "literal") -> float:
    """Distribution indicator over the shared control points.

    ``literal`` is the absolute value of the summed differences, so offsetting
    errors cancel; ``abs`` sums absolute differences instead.
    """
    if sim.control_points != actual.control_points:
        raise MismatchedControlPoints(f"{sim.control_points} vs {actual.control_points}")
    diffs = [a - b for a, b in zip(sim.cumulative, actual.cumulative)]
    return _combine(diffs, mode)


def p2(sim_means: Sequence[float], actual_means: Sequence[float], mode: str = "literal") -> float:
    if len(sim_means) != 3 or len(actual_means) != 3:
        raise ValidationError("p2 compares (small, large, all) means")
    return _combine([a - b for a, b in zip(sim_means, actual_means)], mode)


def _combine(diffs, mode: str) -> float:
    if mode == "literal":
        return abs(float(sum(diffs)))
    if mode == "abs":
        return float(sum(abs(d) for d in diffs))
    raise ValidationError(f"unknown indicator mode '{mode}'")


def validate(sim_value: float, actual_value: float) -> float:
    """Relative error in percent against the measured value."""
    if actual_value == 0:
        raise ZeroReference("relative error against a zero measurement is undefined")
    return abs(actual_value - sim_value) / abs(actual_value) * 100.0


@dataclass(frozen=True)
class OrthogonalRun:
    index: int
    levels: tuple
    params: DrivingParams
    measured: SpeedObservation
    p1: float
    p2: float


def level_means(runs: Sequence[OrthogonalRun], indicator: str = "p1", design=None) -> list[list[float]]:
    """Mean indicator per factor (rows) and level (columns) over the runs sharing that level."""
    design = l16_design() if design is None else design
    if len(runs) != len(design) or sorted(r.index for r in runs) != list(range(1, len(design) + 1)):
        raise IncompleteRuns(f"expected {len(design)} runs indexed 1..{len(design)}, got {len(runs)}")
    value = {r.index: float(getattr(r, indicator)) for r in runs}
    out = []
    for f in range(5):
        row = []
        for level in range(1, 5):
            members = [value[i + 1] for i, d in enumerate(design) if d[f] == level]
            row.append(sum(members) / len(members))
        out.append(row)
    return out


def best_levels(means: Sequence[Sequence[float]]) -> tuple[int, ...]:
    """1-based argmin per factor; ties go to the lower level."""
    return tuple(int(np.argmin(row)) + 1 for row in means)


@dataclass(frozen=True)
class Validation:
    measures: tuple  # (name, simulated, actual, xi or None when the reference is zero)
    passed: bool
    share_within: float


def validate_measures(sim: SpeedObservation, actual: SpeedObservation, limit: float = XI_LIMIT,
                      confidence: float = XI_CONFIDENCE) -> Validation:
    """Score the 8 distribution points per class plus the three means.

    Distribution points whose measured share is zero have no relative error
    and are left out of the count.
    """
    pairs = []
    for cls in CLASSES:
        s, a = sim.distribution(cls), actual.distribution(cls)
        if s.control_points != a.control_points:
            raise MismatchedControlPoints("observation control points differ")
        for x, vs, va in list(zip(a.control_points, s.cumulative, a.cumulative))[:-1]:
            pairs.append((f"{cls}@{x:g}", vs, va))
    for name, vs, va in zip(("mean_small", "mean_large", "mean_all"), sim.means, actual.means):
        pairs.append((name, vs, va))
    measures = []
    scored = []
    for name, vs, va in pairs:
        try:
            xi = validate(vs, va)
        except ZeroReference:
            xi = None
        else:
            scored.append(xi)
        measures.append((name, float(vs), float(va), xi))
    share = sum(1 for xi in scored if xi <= limit) / len(scored) if scored else 0.0
    return Validation(tuple(measures), share >= confidence, share)


@dataclass
class CalibrationResult:
    runs: list
    level_means: dict  # indicator -> 5x4 table
    best: tuple
    best_by: dict  # indicator -> levels
    confirmation: Optional[SpeedObservation]
    validation: Optional[Validation]
    mode: str = "literal"
    factors: FactorLevels = field(default_factory=FactorLevels)

    @property
    def indicators_agree(self) -> bool:
        return len(set(self.best_by.values())) == 1

    def to_dict(self) -> dict:
        names = self.factors.names
        out = {
            "mode": self.mode,
            "factors": {n: list(lv) for n, lv in zip(names, self.factors.levels)},
            "design": [list(r.levels) for r in self.runs],
            "runs": [{"index": r.index, "levels": list(r.levels), "params": dict(r.params.__dict__),
                      "p1": r.p1, "p2": r.p2, "means": list(r.measured.means)} for r in self.runs],
            "level_means": {k: [list(row) for row in v] for k, v in self.level_means.items()},
            "best": list(self.best),
            "best_by": {k: list(v) for k, v in self.best_by.items()},
            "indicators_agree": self.indicators_agree,
            "best_params": dict(self.factors.params(self.best).__dict__),
        }
        if self.validation is not None:
            out["validation"] = {
                "passed": self.validation.passed,
                "share_within": self.validation.share_within,
                "measures": [{"name": n, "simulated": s, "actual": a, "xi": xi}
                             for n, s, a, xi in self.validation.measures],
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def measure(config: ScenarioConfig, detector: int = 1) -> SpeedObservation:
    """Pool the spot speeds of every replication at detector ``detector``."""
    small, large = [], []
    for r in range(config.replications):
        det = run_replication(config, r).detectors[detector]
        small.extend(det.speeds("small"))
        large.extend(det.speeds("large"))
    return SpeedObservation.from_speeds(small, large)


def _measure_params(args):
    template, params = args
    return measure(template.replace(driving=params))


def calibrate(actual: SpeedObservation, template: ScenarioConfig = ScenarioConfig(replications=1, sim_duration=900),
              factors: FactorLevels = FactorLevels(), mode: str = "literal",
              runner: Optional[Callable[[ScenarioConfig], SpeedObservation]] = None,
              workers: int = 1, confirm: bool = True) -> CalibrationResult:
    """Run the full design against ``actual`` and confirm the best combination.

    ``runner`` maps a scenario to its spot-speed observation and defaults to
    simulating it; with ``workers > 1`` the design rows run in parallel
    processes (only with the default runner).
    """
    if actual is None:
        raise ValidationError("observations are required")
    design = l16_design()
    params = [factors.params(row) for row in design]
    if runner is None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            measured = list(pool.map(_measure_params, [(template, p) for p in params]))
    else:
        run = runner or measure
        measured = [run(template.replace(driving=p)) for p in params]
    runs = []
    for i, (row, prm, obs) in enumerate(zip(design, params, measured), start=1):
        ind1 = sum(p1(obs.distribution(c), actual.distribution(c), mode) for c in CLASSES)
        runs.append(OrthogonalRun(i, row, prm, obs, ind1, p2(obs.means, actual.means, mode)))
    means = {k: level_means(runs, k, design) for k in ("p1", "p2")}
    best_by = {k: best_levels(v) for k, v in means.items()}
    best = best_by["p1"]
    confirmation = validation = None
    if confirm:
        run = runner or measure
        confirmation = run(template.replace(driving=factors.params(best)))
        validation = validate_measures(confirmation, actual)
    return CalibrationResult(runs, means, best, best_by, confirmation, validation, mode, factors)
