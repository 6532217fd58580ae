"""Kernel density fields over unsafe-segment centroids and their peaks."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .classify import BehaviorLabel
from .core import Region, RegionGroup, WorkZoneLayout, region_group, region_of
from .errors import LayoutMismatch, ValidationError

K0 = 3.0 / math.pi  # quartic kernel at u = 0


@dataclass(frozen=True)
class DensityGridSpec:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    cell: float = 5.0
    bandwidth: float = 30.0
    proportion_constant: float = 36.5

    def __post_init__(self):
        if not self.cell > 0:
            raise ValidationError("cell must be > 0")
        if self.bandwidth < self.cell:
            raise ValidationError("bandwidth must be >= cell")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValidationError("grid extent is empty")
        if not self.proportion_constant > 0:
            raise ValidationError("proportion_constant must be > 0")

    @classmethod
    def for_layout(cls, layout: WorkZoneLayout, cell: float = 5.0, bandwidth: float = 30.0,
                   upstream: float = 500.0, downstream: float = 100.0, **kw) -> "DensityGridSpec":
        """Grid covering the zone, ``upstream`` metres before it and the carriageway width."""
        margin = bandwidth
        return cls(layout.zone_start_x - upstream, layout.zone_end_x + downstream,
                   -margin, layout.lane_count * layout.lane_width + margin, cell, bandwidth, **kw)

    @property
    def shape(self) -> tuple[int, int]:
        """(rows along y, columns along x)."""
        nx = int(math.ceil((self.x_max - self.x_min) / self.cell - 1e-9))
        ny = int(math.ceil((self.y_max - self.y_min) / self.cell - 1e-9))
        return ny, nx

    def x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.shape[1]) + 0.5) * self.cell

    def y_centers(self) -> np.ndarray:
        return self.y_min + (np.arange(self.shape[0]) + 0.5) * self.cell

    def covers(self, layout: WorkZoneLayout, upstream: float = 500.0) -> bool:
        return self.x_min <= layout.zone_start_x - upstream and self.x_max >= layout.zone_end_x


@dataclass(frozen=True, eq=False)
class DensityField:
    spec: DensityGridSpec
    label: Optional[BehaviorLabel]
    values: np.ndarray  # shape spec.shape, row = y index

    def total_mass(self) -> float:
        return float(self.values.sum() * self.spec.cell**2)


@dataclass(frozen=True)
class ClusterCenter:
    label: Optional[BehaviorLabel]
    x: float
    y: float
    density: float
    proportion: float
    region: Region

    @property
    def group(self) -> RegionGroup:
        return region_group(self.region)


def quartic_kernel(u):
    u = np.asarray(u, dtype=float)
    return np.where(u < 1.0, K0 * (1.0 - u * u) ** 2, 0.0)


def kde(points, spec: DensityGridSpec, weights=None, label: Optional[BehaviorLabel] = None) -> DensityField:
    """Quartic-kernel density on the grid; only cells within one bandwidth of a point are visited."""
    ny, nx = spec.shape
    values = np.zeros((ny, nx))
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return DensityField(spec, label, values)
    w = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=float)
    h, cell = spec.bandwidth, spec.cell
    r = int(math.ceil(h / cell)) + 1
    off = np.arange(-r, r + 1)
    ox, oy = np.meshgrid(off, off)
    ox, oy = ox.ravel(), oy.ravel()
    for start in range(0, len(pts), 512):
        p = pts[start:start + 512]
        pw = w[start:start + 512]
        ix = np.floor((p[:, 0] - spec.x_min) / cell).astype(int)[:, None] + ox
        iy = np.floor((p[:, 1] - spec.y_min) / cell).astype(int)[:, None] + oy
        cx = spec.x_min + (ix + 0.5) * cell
        cy = spec.y_min + (iy + 0.5) * cell
        u = np.hypot(cx - p[:, :1], cy - p[:, 1:]) / h
        keep = (u < 1.0) & (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
        contrib = (pw[:, None] * K0 * (1.0 - u * u) ** 2 / (h * h))[keep]
        np.add.at(values, (iy[keep], ix[keep]), contrib)
    return DensityField(spec, label, values)


def kde_naive(points, spec: DensityGridSpec, weights=None) -> np.ndarray:
    """Direct sum over every (point, cell) pair."""
    ny, nx = spec.shape
    xc, yc = np.meshgrid(spec.x_centers(), spec.y_centers())
    out = np.zeros((ny, nx))
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    w = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=float)
    for (px, py), pw in zip(pts, w):
        u = np.hypot(xc - px, yc - py) / spec.bandwidth
        out += pw * quartic_kernel(u) / spec.bandwidth**2
    return out


def unit_vehicle_weight(n_vehicles: int, spec: DensityGridSpec) -> float:
    """Point weight under which every vehicle stacked on one spot reads as 100 %."""
    if n_vehicles <= 0:
        return 0.0
    return spec.proportion_constant * spec.bandwidth**2 / (K0 * n_vehicles)


def density_to_proportion(d: float, proportion_constant: float = 36.5) -> float:
    return d / proportion_constant * 100.0


def find_cluster_centers(fld: DensityField, layout: WorkZoneLayout, min_peak: float = 0.1) -> list[ClusterCenter]:
    """Strict 8-neighbourhood maxima at or above ``min_peak``, highest first."""
    v = fld.values
    ny, nx = v.shape
    padded = np.full((ny + 2, nx + 2), -np.inf)
    padded[1:-1, 1:-1] = v
    is_max = v >= min_peak
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dx or dy:
                is_max &= v > padded[1 + dy:1 + dy + ny, 1 + dx:1 + dx + nx]
    iy, ix = np.nonzero(is_max)
    xs, ys = fld.spec.x_centers(), fld.spec.y_centers()
    centers = [
        ClusterCenter(fld.label, float(xs[i]), float(ys[j]), float(v[j, i]),
                      density_to_proportion(float(v[j, i]), fld.spec.proportion_constant),
                      region_of(float(xs[i]), layout))
        for j, i in zip(iy, ix)
    ]
    centers.sort(key=lambda c: (-c.density, c.x, c.y))
    return centers


@dataclass(frozen=True)
class ReportEntry:
    density: float
    proportion: float
    present_in: int  # replications in which the combination had a center


@dataclass
class AssessmentReport:
    entries: dict  # (BehaviorLabel, RegionGroup) -> ReportEntry
    replications: int
    metadata: dict = field(default_factory=dict)

    def density(self, label, group=RegionGroup.UPSTREAM) -> float:
        entry = self.entries.get((BehaviorLabel(label), RegionGroup(group)))
        return 0.0 if entry is None else entry.density

    def rows(self) -> list[dict]:
        order = {lab: i for i, lab in enumerate(BehaviorLabel)}
        gorder = {g: i for i, g in enumerate(RegionGroup)}
        keys = sorted(self.entries, key=lambda k: (gorder[k[1]], order[k[0]]))
        return [{"label": lab.value, "group": grp.value, "density": e.density,
                 "proportion": e.proportion, "present_in": e.present_in}
                for (lab, grp), e in ((k, self.entries[k]) for k in keys)]

    def to_dict(self) -> dict:
        return {"replications": self.replications, "metadata": self.metadata, "rows": self.rows()}

    @classmethod
    def from_dict(cls, data: Mapping) -> "AssessmentReport":
        entries = {(BehaviorLabel(r["label"]), RegionGroup(r["group"])):
                   ReportEntry(float(r["density"]), float(r["proportion"]), int(r["present_in"]))
                   for r in data["rows"]}
        return cls(entries, int(data["replications"]), dict(data.get("metadata", {})))


def replication_maxima(centers: Iterable[ClusterCenter]) -> dict:
    best: dict = {}
    for c in centers:
        key = (c.label, c.group)
        if key not in best or c.density > best[key]:
            best[key] = c.density
    return best


def build_report(replicated_fields: Sequence[Mapping], layout: WorkZoneLayout, min_peak: float = 0.1,
                 metadata: Optional[dict] = None) -> AssessmentReport:
    """Average the per-replication peak density of every (label, region group).

    ``replicated_fields`` holds one ``{label: DensityField}`` mapping per
    replication. A combination seen in some replications but not others counts
    as zero where it is missing; one never seen is omitted.
    """
    if not replicated_fields:
        raise ValidationError("build_report needs at least one replication")
    spec = None
    maxima = []
    for fields_ in replicated_fields:
        centers = []
        for label, fld in fields_.items():
            if spec is None:
                spec = fld.spec
            elif fld.spec != spec:
                raise LayoutMismatch("density fields span differing grids")
            centers.extend(find_cluster_centers(fld, layout, min_peak))
        maxima.append(replication_maxima(centers))
    n = len(replicated_fields)
    sums: dict = defaultdict(float)
    present: dict = defaultdict(int)
    for rep in maxima:
        for key, d in rep.items():
            sums[key] += d
            present[key] += 1
    const = spec.proportion_constant if spec is not None else 36.5
    entries = {key: ReportEntry(sums[key] / n, density_to_proportion(sums[key] / n, const), present[key])
               for key in sums}
    return AssessmentReport(entries, n, dict(metadata or {}))
