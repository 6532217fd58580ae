"""Flat-file formats: CSV for bulk numbers, JSON for configs and reports.

Every writer is deterministic and every reader accepts exactly what the
writer produces, so write -> read -> write reproduces the same bytes. Floats
are written with ten significant digits: six would quantise positions to
centimetres, and second differences at 10 Hz would turn that into
acceleration noise of several tenths of a m/s^2.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .classify import BehaviorLabel, BehaviorSegment, FEATURE_NAMES, FeatureVector
from .core import ComfortThresholds, VehicleTrack, WorkZoneLayout
from .correction import Bounds, SafetyThresholds, layout_to_dict
from .density import DensityField, DensityGridSpec
from .detect import DetectionConfig, UnsafeInterval
from .errors import ParseError, SchemaError, ValidationError
from .microsim import DemandConfig, DrivingParams, ModelConstants, ScenarioConfig, SpeedDistribution

TRACK_HEADER = ("vehicle_id", "class", "t", "x", "y", "v", "lane")
DETECTOR_HEADER = ("position", "t", "vehicle_id", "class", "speed_kmh")
SEGMENT_HEADER = ("vehicle_id", "label", "t_start", "t_end", "trigger_axis", "peak_energy", "t_peak",
                  "centroid_x", "centroid_y") + FEATURE_NAMES
DENSITY_HEADER = ("x", "y", "value")


def fmt(value: float) -> str:
    return "%.10g" % value


def _writer(buf):
    return csv.writer(buf, lineterminator="\n")


def _rows(path):
    """(line number, fields) for every non-empty line, header included."""
    text = Path(path).read_text()
    for lineno, row in enumerate(csv.reader(_io.StringIO(text)), start=1):
        if row:
            yield lineno, row


def _float(text: str, lineno: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"column '{column}': '{text}' is not a number", lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"column '{column}': non-finite value", lineno)
    return value


# tracks ----------------------------------------------------------------------

def tracks_to_csv(tracks: Iterable[VehicleTrack]) -> str:
    buf = _io.StringIO()
    w = _writer(buf)
    w.writerow(TRACK_HEADER)
    for tr in tracks:
        v = tr.v if tr.v is not None else [None] * len(tr)
        lane = tr.lane if tr.lane is not None else [None] * len(tr)
        for t, x, y, vi, li in zip(tr.t, tr.x, tr.y, v, lane):
            w.writerow((tr.vehicle_id, tr.vehicle_class, fmt(t), fmt(x), fmt(y),
                        "" if vi is None else fmt(vi), "" if li is None else int(li)))
    return buf.getvalue()


def write_tracks(path, tracks: Iterable[VehicleTrack]) -> None:
    Path(path).write_text(tracks_to_csv(tracks))


def ingest_tracks(path) -> list[VehicleTrack]:
    """Read a tracks CSV. ``v`` and ``lane`` may be missing or blank; speed is then
    recomputed from the positions."""
    rows = _rows(path)
    try:
        _, header = next(rows)
    except StopIteration:
        raise SchemaError(f"{path}: empty file, expected header {','.join(TRACK_HEADER)}") from None
    header = [h.strip() for h in header]
    missing = [c for c in ("vehicle_id", "class", "t", "x", "y") if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    col = {name: header.index(name) for name in header}
    data: dict[str, dict] = {}
    for lineno, row in rows:
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
        vid = row[col["vehicle_id"]]
        if not vid:
            raise ParseError("empty vehicle_id", lineno)
        rec = data.setdefault(vid, {"class": row[col["class"]], "t": [], "x": [], "y": [], "v": [], "lane": []})
        if row[col["class"]] != rec["class"]:
            raise SchemaError(f"vehicle {vid} changes class at line {lineno}")
        t = _float(row[col["t"]], lineno, "t")
        if rec["t"] and t <= rec["t"][-1]:
            raise SchemaError(f"vehicle {vid}: timestamps not increasing at line {lineno}")
        rec["t"].append(t)
        rec["x"].append(_float(row[col["x"]], lineno, "x"))
        rec["y"].append(_float(row[col["y"]], lineno, "y"))
        rv = row[col["v"]] if "v" in col else ""
        rec["v"].append(None if rv == "" else _float(rv, lineno, "v"))
        rl = row[col["lane"]] if "lane" in col else ""
        if rl == "":
            rec["lane"].append(None)
        else:
            try:
                rec["lane"].append(int(rl))
            except ValueError:
                raise ParseError(f"column 'lane': '{rl}' is not an integer", lineno) from None
    out = []
    for vid, rec in data.items():
        t, x, y = (np.array(rec[k]) for k in ("t", "x", "y"))
        if any(v is None for v in rec["v"]):
            v = _speed_from_positions(t, x, y)
        else:
            v = np.array(rec["v"])
        lane = None if any(k is None for k in rec["lane"]) else np.array(rec["lane"], dtype=int)
        out.append(VehicleTrack(vid, rec["class"], t, x, y, v, lane))
    return out


def _speed_from_positions(t, x, y) -> np.ndarray:
    if len(t) < 2:
        return np.zeros(len(t))
    return np.hypot(np.gradient(x, t), np.gradient(y, t))


# detectors -------------------------------------------------------------------

def detectors_to_csv(records) -> str:
    buf = _io.StringIO()
    w = _writer(buf)
    w.writerow(DETECTOR_HEADER)
    for rec in records:
        for t, vid, cls, speed in zip(rec.t, rec.vehicle_id, rec.vehicle_class, rec.speed_kmh):
            w.writerow((fmt(rec.position), fmt(t), vid, cls, fmt(speed)))
    return buf.getvalue()


def read_detectors(path):
    from .microsim import DetectorRecord

    rows = _rows(path)
    try:
        _, header = next(rows)
    except StopIteration:
        raise SchemaError(f"{path}: empty file") from None
    if tuple(header) != DETECTOR_HEADER:
        raise SchemaError(f"{path}: expected header {','.join(DETECTOR_HEADER)}")
    records: dict[float, DetectorRecord] = {}
    for lineno, row in rows:
        if len(row) != len(DETECTOR_HEADER):
            raise ParseError(f"expected {len(DETECTOR_HEADER)} fields, got {len(row)}", lineno)
        pos = _float(row[0], lineno, "position")
        rec = records.setdefault(pos, DetectorRecord(pos))
        rec.t.append(_float(row[1], lineno, "t"))
        rec.vehicle_id.append(row[2])
        rec.vehicle_class.append(row[3])
        rec.speed_kmh.append(_float(row[4], lineno, "speed_kmh"))
    return list(records.values())


# segments --------------------------------------------------------------------

def segments_to_csv(segments: Iterable[BehaviorSegment]) -> str:
    buf = _io.StringIO()
    w = _writer(buf)
    w.writerow(SEGMENT_HEADER)
    for s in segments:
        iv = s.interval
        w.writerow((s.vehicle_id, s.label.value, fmt(iv.t_start), fmt(iv.t_end), iv.trigger_axis,
                    fmt(iv.peak_energy), fmt(iv.t_peak), fmt(s.centroid_x), fmt(s.centroid_y),
                    *(fmt(v) for v in s.features.to_array())))
    return buf.getvalue()


def write_segments(path, segments) -> None:
    Path(path).write_text(segments_to_csv(segments))


def read_segments(path) -> list[BehaviorSegment]:
    rows = _rows(path)
    try:
        _, header = next(rows)
    except StopIteration:
        raise SchemaError(f"{path}: empty file") from None
    if tuple(header) != SEGMENT_HEADER:
        raise SchemaError(f"{path}: unexpected segment header")
    out = []
    for lineno, row in rows:
        if len(row) != len(SEGMENT_HEADER):
            raise ParseError(f"expected {len(SEGMENT_HEADER)} fields, got {len(row)}", lineno)
        try:
            label = BehaviorLabel(row[1])
        except ValueError:
            raise ParseError(f"unknown label '{row[1]}'", lineno) from None
        num = {name: _float(row[i], lineno, name) for i, name in enumerate(SEGMENT_HEADER)
               if name not in ("vehicle_id", "label", "trigger_axis")}
        iv = UnsafeInterval(num["t_start"], num["t_end"], row[4], num["peak_energy"], num["t_peak"])
        feats = FeatureVector(*(num[n] for n in FEATURE_NAMES))
        out.append(BehaviorSegment(row[0], iv, label, num["centroid_x"], num["centroid_y"], feats))
    return out


# density grids ---------------------------------------------------------------

_SPEC_KEYS = ("x_min", "x_max", "y_min", "y_max", "cell", "bandwidth", "proportion_constant")


def density_to_csv(fld: DensityField) -> str:
    """Grid metadata on a ``#`` line, then one ``x,y,value`` row per cell (y outer, x inner)."""
    spec = fld.spec
    meta = " ".join(f"{k}={getattr(spec, k)!r}" for k in _SPEC_KEYS)
    label = "" if fld.label is None else f"label={fld.label.slug} "
    buf = _io.StringIO()
    buf.write(f"# {label}{meta}\n")
    w = _writer(buf)
    w.writerow(DENSITY_HEADER)
    xs, ys = spec.x_centers(), spec.y_centers()
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            w.writerow((fmt(x), fmt(y), fmt(fld.values[j, i])))
    return buf.getvalue()


def write_density(path, fld: DensityField) -> None:
    Path(path).write_text(density_to_csv(fld))


def read_density(path) -> DensityField:
    text = Path(path).read_text()
    lines = text.splitlines()
    meta: dict[str, str] = {}
    start = 0
    if lines and lines[0].startswith("#"):
        for item in lines[0][1:].split():
            key, _, value = item.partition("=")
            meta[key] = value
        start = 1
    rows = list(csv.reader(lines[start:]))
    if not rows or tuple(rows[0]) != DENSITY_HEADER:
        raise SchemaError(f"{path}: expected header {','.join(DENSITY_HEADER)}")
    pts = []
    for k, row in enumerate(rows[1:], start=start + 2):
        if not row:
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", k)
        pts.append((_float(row[0], k, "x"), _float(row[1], k, "y"), _float(row[2], k, "value")))
    arr = np.array(pts, dtype=float).reshape(-1, 3)
    if all(key in meta for key in _SPEC_KEYS):
        spec = DensityGridSpec(**{key: float(meta[key]) for key in _SPEC_KEYS})
    else:
        spec = _infer_spec(arr)
    ny, nx = spec.shape
    if len(arr) != nx * ny:
        raise SchemaError(f"{path}: {len(arr)} cells do not fill a {nx}x{ny} grid")
    values = arr[:, 2].reshape(ny, nx)
    label = BehaviorLabel.from_slug(meta["label"]) if "label" in meta else None
    return DensityField(spec, label, values)


def _infer_spec(arr: np.ndarray) -> DensityGridSpec:
    if len(arr) == 0:
        raise SchemaError("density file has no cells")
    xs, ys = np.unique(arr[:, 0]), np.unique(arr[:, 1])
    steps = np.diff(xs) if len(xs) > 1 else np.diff(ys)
    if len(steps) == 0:
        raise SchemaError("cannot infer the cell size from a single cell")
    cell = float(steps.min())
    half = cell / 2
    return DensityGridSpec(xs[0] - half, xs[-1] + half, ys[0] - half, ys[-1] + half, cell, max(30.0, cell))


# JSON configs ----------------------------------------------------------------

def dumps(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", exc.lineno) from None


def _dist_to_dict(d: SpeedDistribution) -> dict:
    return {"control_points": list(d.control_points), "cumulative": list(d.cumulative)}


def _pick(cls, data: dict, where: str) -> dict:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise SchemaError(f"{where}: unknown keys {unknown}")
    return data


def layout_from_dict(data: dict) -> WorkZoneLayout:
    data = dict(_pick(WorkZoneLayout, data, "layout"))
    if "closed_lanes" in data:
        data["closed_lanes"] = frozenset(data["closed_lanes"])
    return WorkZoneLayout(**data)


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    d = cfg.demand
    return {
        "layout": layout_to_dict(cfg.layout),
        "demand": {"volume": d.volume, "large_fraction": d.large_fraction, "arrival": d.arrival,
                   "desired_speed": {k: _dist_to_dict(v) for k, v in sorted(d.desired_speed.items())}},
        "driving": dict(cfg.driving.__dict__),
        "warning_speed_limit": cfg.warning_speed_limit,
        "sim_duration": cfg.sim_duration,
        "warmup": cfg.warmup,
        "step_dt": cfg.step_dt,
        "seed": cfg.seed,
        "replications": cfg.replications,
        "model": {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.model.__dict__.items()},
        "detector_positions": None if cfg.detector_positions is None else list(cfg.detector_positions),
    }


def scenario_from_dict(data: dict) -> ScenarioConfig:
    data = dict(_pick(ScenarioConfig, data, "scenario"))
    if "layout" in data:
        data["layout"] = layout_from_dict(data["layout"])
    if "demand" in data:
        dem = dict(_pick(DemandConfig, data["demand"], "demand"))
        if "desired_speed" in dem:
            dem["desired_speed"] = {k: SpeedDistribution(v["control_points"], v["cumulative"])
                                    for k, v in dem["desired_speed"].items()}
        data["demand"] = DemandConfig(**dem)
    if "driving" in data:
        data["driving"] = DrivingParams(**_pick(DrivingParams, data["driving"], "driving"))
    if "model" in data:
        model = dict(_pick(ModelConstants, data["model"], "model"))
        if "notice_distance" in model:
            model["notice_distance"] = tuple(model["notice_distance"])
        data["model"] = ModelConstants(**model)
    if data.get("detector_positions") is not None:
        data["detector_positions"] = tuple(data["detector_positions"])
    try:
        return ScenarioConfig(**data)
    except TypeError as exc:
        raise SchemaError(f"scenario: {exc}") from None


def detection_to_dict(cfg: DetectionConfig) -> dict:
    out = dict(cfg.__dict__)
    out["thresholds"] = dict(cfg.thresholds.__dict__)
    return out


def detection_from_dict(data: dict) -> DetectionConfig:
    data = dict(_pick(DetectionConfig, data, "detection"))
    if "thresholds" in data:
        data["thresholds"] = ComfortThresholds(**_pick(ComfortThresholds, data["thresholds"], "thresholds"))
    return DetectionConfig(**data)


def analysis_to_dict(cfg) -> dict:
    out = {k: v for k, v in cfg.__dict__.items() if k != "detection"}
    out["detection"] = detection_to_dict(cfg.detection)
    return out


def analysis_from_dict(data: dict):
    from .pipeline import AnalysisConfig

    data = dict(_pick(AnalysisConfig, data, "analysis"))
    if "detection" in data:
        data["detection"] = detection_from_dict(data["detection"])
    return AnalysisConfig(**data)


def _finite_or_none(value: float):
    return None if math.isinf(value) else value


@dataclass
class PipelineConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    analysis: object = None
    classifier: Optional[str] = None  # model file; None selects the rule cascade
    thresholds: SafetyThresholds = field(default_factory=SafetyThresholds)
    bounds: Bounds = field(default_factory=Bounds)
    output: str = "out"

    def __post_init__(self):
        if self.analysis is None:
            from .pipeline import AnalysisConfig

            self.analysis = AnalysisConfig()

    def to_dict(self) -> dict:
        return {
            "scenario": scenario_to_dict(self.scenario),
            "analysis": analysis_to_dict(self.analysis),
            "classifier": self.classifier,
            "thresholds": {k: _finite_or_none(v) for k, v in self.thresholds.__dict__.items()},
            "bounds": dict(self.bounds.__dict__),
            "output": self.output,
        }

    @classmethod
    def from_dict(cls, data: dict, base: Optional[Path] = None) -> "PipelineConfig":
        from .correction import thresholds_from_dict

        data = dict(_pick(cls, data, "pipeline"))
        out = cls(
            scenario=scenario_from_dict(data.get("scenario", {})),
            analysis=analysis_from_dict(data.get("analysis", {})),
            classifier=data.get("classifier"),
            thresholds=thresholds_from_dict(data.get("thresholds", {})),
            bounds=Bounds(**_pick(Bounds, data.get("bounds", {}), "bounds")),
            output=data.get("output", "out"),
        )
        if out.classifier is not None and base is not None and not Path(out.classifier).is_absolute():
            out.classifier = str(base / out.classifier)
        if out.classifier is not None and not Path(out.classifier).exists():
            raise ValidationError(f"classifier model '{out.classifier}' does not exist")
        return out
