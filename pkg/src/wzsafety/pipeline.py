"""Trajectories in, per-label density fields and the peak-density report out."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .classify import BehaviorSegment, ClassifierModel, RuleConfig, label_segments
from .core import VehicleTrack, WorkZoneLayout
from .density import AssessmentReport, DensityField, DensityGridSpec, build_report, kde, unit_vehicle_weight
from .detect import DetectionConfig, extract_unsafe_segments
from .errors import TooShort
from .kinematics import derive_kinematics


@dataclass(frozen=True)
class AnalysisConfig:
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    cell: float = 5.0
    bandwidth: float = 30.0
    proportion_constant: float = 36.5
    min_peak: float = 0.1
    # "vehicle": weights scaled by vehicle count; "unit": every centroid weighs 1
    weighting: str = "vehicle"

    def grid(self, layout: WorkZoneLayout) -> DensityGridSpec:
        return DensityGridSpec.for_layout(layout, self.cell, self.bandwidth,
                                          proportion_constant=self.proportion_constant)


@dataclass
class AnalysisResult:
    segments: list
    fields: dict  # BehaviorLabel -> DensityField
    n_vehicles: int
    grid: DensityGridSpec


def track_segments(tracks: Iterable[VehicleTrack], layout: WorkZoneLayout, config: AnalysisConfig = AnalysisConfig(),
                   model: Optional[ClassifierModel] = None) -> tuple[list[BehaviorSegment], int]:
    rule = RuleConfig(lane_width=layout.lane_width)
    segments: list[BehaviorSegment] = []
    n = 0
    for track in tracks:
        n += 1
        try:
            kt = derive_kinematics(track)
        except TooShort:
            continue
        intervals = extract_unsafe_segments(kt, config.detection)
        segments.extend(label_segments(kt, intervals, model=model, rule=rule))
    return segments, n


def density_fields(segments: Sequence[BehaviorSegment], n_vehicles: int, grid: DensityGridSpec,
                   weighting: str = "vehicle") -> dict:
    by_label = defaultdict(list)
    for seg in segments:
        by_label[seg.label].append((seg.centroid_x, seg.centroid_y))
    w = unit_vehicle_weight(n_vehicles, grid) if weighting == "vehicle" else 1.0
    out = {}
    for label in sorted(by_label, key=lambda lab: list(type(lab)).index(lab)):
        pts = np.array(by_label[label])
        out[label] = kde(pts, grid, np.full(len(pts), w), label)
    return out


def analyze(tracks: Iterable[VehicleTrack], layout: WorkZoneLayout, config: AnalysisConfig = AnalysisConfig(),
            model: Optional[ClassifierModel] = None) -> AnalysisResult:
    grid = config.grid(layout)
    segments, n = track_segments(tracks, layout, config, model)
    return AnalysisResult(segments, density_fields(segments, n, grid, config.weighting), n, grid)


def assess_replications(results: Sequence[AnalysisResult], layout: WorkZoneLayout,
                        config: AnalysisConfig = AnalysisConfig(), metadata: Optional[dict] = None) -> AssessmentReport:
    return build_report([r.fields for r in results], layout, config.min_peak, metadata)


def simulate_and_assess(scenario, config: AnalysisConfig = AnalysisConfig(), model=None, check: bool = False):
    """Run every replication of ``scenario`` and build the averaged report."""
    from .microsim import run_replication

    results = []
    for r in range(scenario.replications):
        sim = run_replication(scenario, r, check=check)
        results.append(analyze(sim.tracks, scenario.effective_layout, config, model))
    meta = {"seed": scenario.seed, "sim_duration": scenario.sim_duration}
    return assess_replications(results, scenario.effective_layout, config, meta), results
