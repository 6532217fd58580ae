"""Work-zone safety assessment from vehicle trajectories.

Trajectories (simulated or ingested) are differentiated into longitudinal and
lateral acceleration, unsafe intervals are cut out by short-time energy,
labelled with one of eleven manoeuvre classes, and mapped to kernel density
fields whose peaks drive a rule-based layout correction loop.
"""

__version__ = "0.1.0"

from .classify import BehaviorLabel, BehaviorSegment, ClassifierModel  # noqa: E402
from .core import Region, RegionGroup, TransitionStyle, VehicleTrack, WorkZoneLayout, region_of  # noqa: E402
from .density import AssessmentReport, DensityField, DensityGridSpec  # noqa: E402
from .detect import DetectionConfig  # noqa: E402
from .microsim import DrivingParams, ScenarioConfig, run_replication, run_scenario  # noqa: E402
from .pipeline import AnalysisConfig, analyze, simulate_and_assess  # noqa: E402

__all__ = [
    "AnalysisConfig", "AssessmentReport", "BehaviorLabel", "BehaviorSegment", "ClassifierModel",
    "DensityField", "DensityGridSpec", "DetectionConfig", "DrivingParams", "Region", "RegionGroup",
    "ScenarioConfig", "TransitionStyle", "VehicleTrack", "WorkZoneLayout", "analyze", "region_of",
    "run_replication", "run_scenario", "simulate_and_assess",
]
