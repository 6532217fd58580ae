"""Behaviour labelling of unsafe intervals.

Two routes exist: a deterministic rule cascade over interval features, and a
linear one-vs-rest max-margin classifier trained against the cascade's labels.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import KinematicTrack
from .detect import UnsafeInterval
from .errors import ClassUnderrepresented, EmptyInterval, SchemaError

MODEL_VERSION = 1
MODEL_MAGIC = "wzsafety-linear-ovr"


class BehaviorLabel(str, enum.Enum):
    LC = "L&C"
    TLC = "TL&C"
    TRC = "TR&C"
    TLA = "TL&A"
    TRA = "TR&A"
    LA = "L&A"
    TLD = "TL&D"
    TRD = "TR&D"
    LD = "L&D"
    TLCL = "TL&CL"
    TRCL = "TR&CL"

    @property
    def slug(self) -> str:
        return self.value.replace("&", "_")

    @classmethod
    def from_slug(cls, slug: str) -> "BehaviorLabel":
        return cls(slug.replace("_", "&"))


LABELS = tuple(BehaviorLabel)
LANE_CHANGE_LABELS = (BehaviorLabel.TLCL, BehaviorLabel.TRCL)


@dataclass(frozen=True)
class FeatureVector:
    mean_ax: float
    min_ax: float
    max_ax: float
    mean_abs_ay: float
    max_abs_ay: float
    signed_peak_ay: float
    net_heading_change: float
    net_lateral_displacement: float
    duration: float
    mean_v: float

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    @classmethod
    def from_array(cls, values) -> "FeatureVector":
        return cls(*map(float, values))


FEATURE_NAMES = tuple(f.name for f in fields(FeatureVector))


@dataclass(frozen=True)
class RuleConfig:
    lane_width: float = 3.5
    heading_turn_threshold: float = 0.15
    accel_cut: float = 0.3
    lane_change_fraction: float = 0.6


@dataclass(frozen=True)
class BehaviorSegment:
    vehicle_id: str
    interval: UnsafeInterval
    label: BehaviorLabel
    centroid_x: float
    centroid_y: float
    features: FeatureVector


def extract_features(ktrack: KinematicTrack, interval: UnsafeInterval) -> FeatureVector:
    inside = (ktrack.t >= interval.t_start - 1e-9) & (ktrack.t <= interval.t_end + 1e-9)
    idx = np.flatnonzero(inside)
    if len(idx) < 2:
        raise EmptyInterval(f"interval [{interval.t_start}, {interval.t_end}] holds {len(idx)} samples")
    ax, ay = ktrack.a_x[idx], ktrack.a_y[idx]
    heading = np.unwrap(ktrack.heading[idx])
    peak = int(np.argmax(np.abs(ay)))
    return FeatureVector(
        mean_ax=float(ax.mean()),
        min_ax=float(ax.min()),
        max_ax=float(ax.max()),
        mean_abs_ay=float(np.abs(ay).mean()),
        max_abs_ay=float(np.abs(ay).max()),
        signed_peak_ay=float(ay[peak]),
        net_heading_change=float(heading[-1] - heading[0]),
        net_lateral_displacement=float(ktrack.y[idx[-1]] - ktrack.y[idx[0]]),
        duration=float(ktrack.t[idx[-1]] - ktrack.t[idx[0]]),
        mean_v=float(ktrack.v[idx].mean()),
    )


_COMPOSE = {
    ("L", "C"): BehaviorLabel.LC, ("L", "A"): BehaviorLabel.LA, ("L", "D"): BehaviorLabel.LD,
    ("TL", "C"): BehaviorLabel.TLC, ("TL", "A"): BehaviorLabel.TLA, ("TL", "D"): BehaviorLabel.TLD,
    ("TR", "C"): BehaviorLabel.TRC, ("TR", "A"): BehaviorLabel.TRA, ("TR", "D"): BehaviorLabel.TRD,
}


def rule_label(features: FeatureVector, lane_width: float = 3.5, config: Optional[RuleConfig] = None) -> BehaviorLabel:
    """Deterministic cascade: lane change, then turning, then longitudinal state."""
    cfg = config or RuleConfig(lane_width=lane_width)
    heading = features.net_heading_change
    lateral = features.net_lateral_displacement
    turning = abs(heading) >= cfg.heading_turn_threshold
    if abs(lateral) >= cfg.lane_change_fraction * cfg.lane_width and not turning:
        return BehaviorLabel.TLCL if lateral > 0 else BehaviorLabel.TRCL
    direction = ("TL" if heading > 0 else "TR") if turning else "L"
    if features.mean_ax > cfg.accel_cut:
        state = "A"
    elif features.mean_ax < -cfg.accel_cut:
        state = "D"
    else:
        state = "C"
    return _COMPOSE[direction, state]


@dataclass(eq=False)
class ClassifierModel:
    classes: tuple[BehaviorLabel, ...]
    mean: np.ndarray
    scale: np.ndarray
    weights: np.ndarray  # (n_classes, n_features)
    bias: np.ndarray  # (n_classes,)

    def scores(self, X) -> np.ndarray:
        Z = (np.atleast_2d(np.asarray(X, dtype=float)) - self.mean) / self.scale
        return Z @ self.weights.T + self.bias

    def predict_many(self, X) -> list[BehaviorLabel]:
        # np.argmax keeps the first maximum, and classes are stored in enum order
        return [self.classes[i] for i in np.argmax(self.scores(X), axis=1)]

    def save(self, path) -> None:
        Path(path).write_text(dumps_model(self))

    @classmethod
    def load(cls, path) -> "ClassifierModel":
        return loads_model(Path(path).read_text())


def _binary_hinge_subgradient(Z, y, sample_weight, lam, epochs, lr0, w0):
    """Full-batch subgradient descent on the L2-regularised hinge loss.

    Returns the average of the second-half iterates, which damps the
    oscillation inherent to subgradient steps.
    """
    n, d = Z.shape
    w = w0.copy()
    b = 0.0
    avg_w = np.zeros(d)
    avg_b = 0.0
    n_avg = 0
    sw = sample_weight / sample_weight.sum()
    for epoch in range(epochs):
        margin = y * (Z @ w + b)
        active = margin < 1
        coef = sw * y * active
        grad_w = lam * w - Z.T @ coef
        grad_b = -coef.sum()
        step = lr0 / math.sqrt(epoch + 1)
        w -= step * grad_w
        b -= step * grad_b
        if epoch >= epochs // 2:
            avg_w += w
            avg_b += b
            n_avg += 1
    return avg_w / n_avg, avg_b / n_avg


def train(X, labels: Sequence, seed: int = 0, lam: float = 1e-4, epochs: int = 10000,
          lr0: float = 1.0, min_per_class: int = 20) -> ClassifierModel:
    """Fit one binary max-margin separator per class (class-balanced hinge loss)."""
    X = np.asarray(X, dtype=float)
    y_lab = [BehaviorLabel(lab) for lab in labels]
    counts = {lab: y_lab.count(lab) for lab in set(y_lab)}
    short = sorted((lab.value, c) for lab, c in counts.items() if c < min_per_class)
    if short:
        raise ClassUnderrepresented(f"classes below {min_per_class} examples: {short}")
    classes = tuple(lab for lab in LABELS if lab in counts)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    Z = (X - mean) / scale
    rng = np.random.default_rng(seed)
    W = np.zeros((len(classes), X.shape[1]))
    B = np.zeros(len(classes))
    y_arr = np.array([lab.value for lab in y_lab])
    for k, cls in enumerate(classes):
        y = np.where(y_arr == cls.value, 1.0, -1.0)
        n_pos = (y > 0).sum()
        sample_weight = np.where(y > 0, 0.5 / n_pos, 0.5 / (len(y) - n_pos))
        w0 = rng.normal(scale=1e-3, size=X.shape[1])
        W[k], B[k] = _binary_hinge_subgradient(Z, y, sample_weight, lam, epochs, lr0, w0)
    return ClassifierModel(classes, mean, scale, W, B)


def predict(model: Optional[ClassifierModel], features: FeatureVector, rule: Optional[RuleConfig] = None) -> BehaviorLabel:
    """Classify one feature vector; ``model=None`` selects the rule cascade."""
    if model is None:
        return rule_label(features, config=rule or RuleConfig())
    return model.predict_many(features.to_array()[None, :])[0]


def dumps_model(model: ClassifierModel) -> str:
    lines = [
        f"{MODEL_MAGIC} {MODEL_VERSION}",
        "classes " + " ".join(c.value for c in model.classes),
        "features " + " ".join(FEATURE_NAMES),
        "mean " + " ".join(repr(float(v)) for v in model.mean),
        "scale " + " ".join(repr(float(v)) for v in model.scale),
    ]
    for cls, w, b in zip(model.classes, model.weights, model.bias):
        lines.append(f"weights {cls.value} " + " ".join(repr(float(v)) for v in (b, *w)))
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> ClassifierModel:
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.startswith("#")]
    if not rows or rows[0][0] != MODEL_MAGIC:
        raise SchemaError("not a classifier model file")
    if int(rows[0][1]) != MODEL_VERSION:
        raise SchemaError(f"unsupported model version {rows[0][1]}")
    table = {}
    weights = []
    for row in rows[1:]:
        if row[0] == "weights":
            weights.append((BehaviorLabel(row[1]), [float(v) for v in row[2:]]))
        else:
            table[row[0]] = row[1:]
    if tuple(table.get("features", ())) != FEATURE_NAMES:
        raise SchemaError("feature list does not match this version")
    classes = tuple(BehaviorLabel(c) for c in table["classes"])
    if [c for c, _ in weights] != list(classes):
        raise SchemaError("weight rows do not match class list")
    wb = np.array([row for _, row in weights])
    return ClassifierModel(classes, np.array(table["mean"], dtype=float),
                           np.array(table["scale"], dtype=float), wb[:, 1:], wb[:, 0])


def label_segments(ktrack: KinematicTrack, intervals: Iterable[UnsafeInterval],
                   model: Optional[ClassifierModel] = None, rule: Optional[RuleConfig] = None) -> list[BehaviorSegment]:
    """Features, label and peak-energy position for every interval of one track."""
    out = []
    for iv in intervals:
        try:
            feats = extract_features(ktrack, iv)
        except EmptyInterval:
            continue
        k = int(np.argmin(np.abs(ktrack.t - iv.t_peak)))
        out.append(BehaviorSegment(ktrack.vehicle_id, iv, predict(model, feats, rule),
                                   float(ktrack.x[k]), float(ktrack.y[k]), feats))
    return out


def features_dict(features: FeatureVector) -> dict:
    return asdict(features)
