"""Unsafe-segment extraction by short-time energy with a dual threshold.

The acceleration signal is cut into rectangular frames; a frame's energy is
the sum of squared samples. Frames at or above the high threshold T2 seed a
segment, which then grows to the surrounding run of frames at or above the
low threshold T1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ComfortThresholds, KinematicTrack
from .errors import TooShort


T1_FLOOR = 0.1


@dataclass(frozen=True)
class DetectionConfig:
    window_s: float = 1.0
    hop_s: float = 0.1
    thresholds: ComfortThresholds = field(default_factory=ComfortThresholds)
    t1_percentile: float = 0.30
    merge_gap_s: float = 0.3
    t1_floor: float = T1_FLOOR

    def __post_init__(self):
        if self.window_s <= 0:
            raise ValueError("window_s must be > 0")
        if not 0 < self.hop_s <= self.window_s:
            raise ValueError("hop_s must be in (0, window_s]")
        if not 0 < self.t1_percentile < 1:
            raise ValueError("t1_percentile must be in (0, 1)")
        if not 0 < self.t1_floor <= 1:
            raise ValueError("t1_floor must be in (0, 1]")

    def window_samples(self, rate_hz: float) -> int:
        return max(1, int(round(self.window_s * rate_hz)))

    def hop_samples(self, rate_hz: float) -> int:
        return max(1, int(round(self.hop_s * rate_hz)))


@dataclass(frozen=True, eq=False)
class EnergySeries:
    frame_times: np.ndarray
    energy: np.ndarray
    window_samples: int
    hop_samples: int
    source_axis: str = "longitudinal"

    def __len__(self) -> int:
        return len(self.energy)

    @property
    def frame_dt(self) -> float:
        if len(self.frame_times) > 1:
            return float(self.frame_times[1] - self.frame_times[0])
        return 0.0


@dataclass(frozen=True)
class UnsafeInterval:
    t_start: float
    t_end: float
    trigger_axis: str
    peak_energy: float
    t_peak: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


def frame_starts(n: int, window: int, hop: int) -> np.ndarray:
    if n < window:
        raise TooShort(f"signal has {n} samples, window needs {window}")
    return np.arange((n - window) // hop + 1) * hop


def short_time_energy(signal, window: int, hop: int, times=None, axis: str = "longitudinal") -> EnergySeries:
    """Rectangular-window energy ``E_k = sum(a_i**2)`` over frames of ``window`` samples."""
    a = np.asarray(signal, dtype=float)
    starts = frame_starts(len(a), window, hop)
    csum = np.concatenate(([0.0], np.cumsum(a * a)))
    energy = csum[starts + window] - csum[starts]
    # cumulative sums can leave -1e-15 residue on all-zero stretches
    energy = np.maximum(energy, 0.0)
    if times is None:
        times = np.arange(len(a), dtype=float)
    times = np.asarray(times, dtype=float)
    centers = 0.5 * (times[starts] + times[starts + window - 1])
    return EnergySeries(centers, energy, window, hop, axis)


def t2_from_threshold(a_threshold: float, window_samples: int) -> float:
    """Energy of a constant signal at the threshold filling one window."""
    return a_threshold**2 * window_samples


def t1_adaptive(energy, percentile: float = 0.30, t2: float | None = None, floor: float = T1_FLOOR) -> float:
    """Energy ranked ``floor(percentile * (n - 1))`` from the top, capped at ``t2``.

    When ``t2`` is given the result is also floored at ``floor * t2``: on a
    mostly calm track the rank value is close to zero and would let a segment
    swallow minutes of ordinary driving.
    """
    values = np.sort(np.asarray(energy.energy if isinstance(energy, EnergySeries) else energy, dtype=float))[::-1]
    t1 = float(values[int(math.floor(percentile * (len(values) - 1)))])
    if t2 is None:
        return t1
    return min(max(t1, floor * t2), t2)


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Inclusive (start, end) index pairs of the True runs of ``mask``."""
    if not mask.any():
        return []
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [(int(s), int(e) - 1) for s, e in zip(edges[::2], edges[1::2])]


def endpoint_frames(energy, t1: float, t2: float, core=None, merge_gap_frames: int = 0) -> list[tuple[int, int]]:
    """Frame ranges (inclusive) of detected segments.

    Runs of frames with ``E >= t1`` separated by fewer than ``merge_gap_frames``
    frames are fused first; a fused run is kept when it contains at least one
    core frame (``E >= t2`` and ``core``).
    """
    e = np.asarray(energy.energy if isinstance(energy, EnergySeries) else energy, dtype=float)
    if t1 > t2:
        raise ValueError("t1 must not exceed t2")
    is_core = e >= t2
    if core is not None:
        is_core &= np.asarray(core, dtype=bool)
    if not is_core.any():
        return []
    fused: list[list[int]] = []
    for s, end in _runs(e >= t1):
        if fused and s - fused[-1][1] - 1 < merge_gap_frames:
            fused[-1][1] = end
        else:
            fused.append([s, end])
    return [(s, end) for s, end in fused if is_core[s:end + 1].any()]


def detect_endpoints(energy: EnergySeries, t1: float, t2: float, merge_gap_s: float = 0.0,
                     core=None, span: tuple[float, float] | None = None) -> list[UnsafeInterval]:
    """Map detected frame ranges to time intervals.

    Each frame owns half a hop on either side of its center time.
    """
    step = energy.frame_dt
    gap_frames = int(math.ceil(merge_gap_s / step - 1e-9)) if step > 0 else 0
    out = []
    for s, end in endpoint_frames(energy, t1, t2, core=core, merge_gap_frames=gap_frames):
        half = 0.5 * step if step > 0 else 0.05
        lo = energy.frame_times[s] - half
        hi = energy.frame_times[end] + half
        if span is not None:
            lo, hi = max(lo, span[0]), min(hi, span[1])
        k = s + int(np.argmax(energy.energy[s:end + 1]))
        out.append(UnsafeInterval(float(lo), float(hi), energy.source_axis,
                                  float(energy.energy[k]), float(energy.frame_times[k])))
    return out


def _window_extrema(signal: np.ndarray, starts: np.ndarray, window: int):
    from numpy.lib.stride_tricks import sliding_window_view

    view = sliding_window_view(signal, window)[starts]
    return view.max(axis=1), view.min(axis=1)


def _merge(intervals: list[tuple[UnsafeInterval, float]], gap: float) -> list[UnsafeInterval]:
    """Union intervals; ``score`` (energy relative to T2) picks the representative peak."""
    merged: list[tuple[UnsafeInterval, float]] = []
    for iv, score in sorted(intervals, key=lambda p: (p[0].t_start, p[0].t_end)):
        if merged and iv.t_start - merged[-1][0].t_end < gap:
            prev, prev_score = merged[-1]
            axis = prev.trigger_axis if prev.trigger_axis == iv.trigger_axis else "both"
            best, best_score = (iv, score) if score > prev_score else (prev, prev_score)
            merged[-1] = (UnsafeInterval(prev.t_start, max(prev.t_end, iv.t_end), axis,
                                         max(prev.peak_energy, iv.peak_energy), best.t_peak), best_score)
        else:
            merged.append((iv, score))
    return [iv for iv, _ in merged]


def extract_unsafe_segments(ktrack: KinematicTrack, config: DetectionConfig = DetectionConfig()) -> list[UnsafeInterval]:
    """Detect unsafe intervals on both acceleration axes and merge them.

    The longitudinal axis has different limits for acceleration and braking,
    so a longitudinal core frame must both reach the energy of its side's limit
    and contain at least one raw sample beyond that limit.
    """
    rate = ktrack.sample_rate_hz
    w, hop = config.window_samples(rate), config.hop_samples(rate)
    if len(ktrack) < w:
        return []
    th = config.thresholds
    span = (float(ktrack.t[0]), float(ktrack.t[-1]))
    found: list[tuple[UnsafeInterval, float]] = []

    ex = short_time_energy(ktrack.a_x, w, hop, ktrack.t, "longitudinal")
    t2_acc = t2_from_threshold(th.lon_accel_max, w)
    t2_dec = t2_from_threshold(th.lon_decel_max, w)
    hi, lo = _window_extrema(ktrack.a_x, frame_starts(len(ktrack), w, hop), w)
    core = ((ex.energy >= t2_acc) & (hi > th.lon_accel_max)) | ((ex.energy >= t2_dec) & (lo < -th.lon_decel_max))
    t2_x = min(t2_acc, t2_dec)
    t1_x = t1_adaptive(ex, config.t1_percentile, t2_x, config.t1_floor)
    for iv in detect_endpoints(ex, t1_x, t2_x, config.merge_gap_s, core=core, span=span):
        found.append((iv, iv.peak_energy / t2_x))

    ey = short_time_energy(ktrack.a_y, w, hop, ktrack.t, "lateral")
    t2_y = t2_from_threshold(th.lat_max, w)
    t1_y = t1_adaptive(ey, config.t1_percentile, t2_y, config.t1_floor)
    for iv in detect_endpoints(ey, t1_y, t2_y, config.merge_gap_s, span=span):
        found.append((iv, iv.peak_energy / t2_y))

    return _merge(found, config.merge_gap_s)
