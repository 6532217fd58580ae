"""Synthetic trajectory generators with known ground truth.

Used for the classifier training corpus and as independent oracles in tests.
"""

from __future__ import annotations

import numpy as np

from .classify import BehaviorLabel
from .core import VehicleTrack

SUBSTEPS = 20


def circle_track(radius=100.0, speed=20.0, duration=10.0, rate_hz=10.0, clockwise=False,
                 vehicle_id="circle") -> VehicleTrack:
    t = np.arange(int(round(duration * rate_hz)) + 1) / rate_hz
    omega = speed / radius * (-1.0 if clockwise else 1.0)
    return VehicleTrack(vehicle_id, "small", t, radius * np.cos(omega * t), radius * np.sin(omega * t))


def s_curve_track(width=3.5, speed=20.0, duration=4.0, lead=2.0, rate_hz=10.0, vehicle_id="lc"):
    """Raised-cosine lane change at constant forward speed.

    Peak lateral acceleration of the profile is ``(width / 2) * (pi / duration)**2``.
    """
    n = int(round((duration + 2 * lead) * rate_hz)) + 1
    t = np.arange(n) / rate_hz
    phase = np.clip((t - lead) / duration, 0.0, 1.0)
    y = 0.5 * width * (1.0 - np.cos(np.pi * phase))
    return VehicleTrack(vehicle_id, "small", t, speed * t, y)


def integrate_path(v0, ax, omega, rate_hz=10.0, y0=0.0, lateral=None):
    """Positions sampled at ``rate_hz`` for piecewise-constant per-sample controls.

    ``ax`` and ``omega`` hold one value per output interval; integration uses
    ``SUBSTEPS`` sub-steps so that sampled kinematics match the controls.
    """
    ax = np.repeat(np.asarray(ax, dtype=float), SUBSTEPS)
    omega = np.repeat(np.asarray(omega, dtype=float), SUBSTEPS)
    h = 1.0 / rate_hz / SUBSTEPS
    v_fine = np.maximum(v0 + np.concatenate(([0.0], np.cumsum(ax * h))), 0.0)
    th_fine = np.concatenate(([0.0], np.cumsum(omega * h)))
    v_mid = 0.5 * (v_fine[1:] + v_fine[:-1])
    th_mid = 0.5 * (th_fine[1:] + th_fine[:-1])
    x_fine = np.concatenate(([0.0], np.cumsum(v_mid * np.cos(th_mid) * h)))
    y_fine = y0 + np.concatenate(([0.0], np.cumsum(v_mid * np.sin(th_mid) * h)))
    x, y, v = x_fine[::SUBSTEPS], y_fine[::SUBSTEPS], v_fine[::SUBSTEPS]
    n = len(x) - 1
    if lateral is not None:
        y = y + np.asarray(lateral, dtype=float)
    t = np.arange(n + 1) / rate_hz
    return t, x, y, v


def behavior_track(kind: BehaviorLabel, rng: np.random.Generator, rate_hz=10.0, lane_width=3.5):
    """A track with one manoeuvre of the given kind between calm lead-in/out.

    Returns ``(track, (t_start, t_end))`` of the manoeuvre.
    """
    kind = BehaviorLabel(kind)
    lead = 1.0
    duration = rng.uniform(2.0, 5.0)
    v0 = rng.uniform(10.0, 28.0)
    n_lead = int(round(lead * rate_hz))
    n_man = int(round(duration * rate_hz))
    n = 2 * n_lead + n_man
    ax = np.zeros(n)
    omega = np.zeros(n)
    lateral = np.zeros(n + 1)
    man = slice(n_lead, n_lead + n_man)
    name = kind.value
    if name.endswith("&CL"):
        a = rng.uniform(-1.5, 1.5)
        width = lane_width * rng.uniform(0.85, 1.15)
        sign = 1.0 if name.startswith("TL") else -1.0
        phase = np.clip((np.arange(n + 1) - n_lead) / n_man, 0.0, 1.0)
        lateral = sign * 0.5 * width * (1.0 - np.cos(np.pi * phase))
    else:
        state = name[-1]
        if state == "A":
            a = rng.uniform(0.7, 3.0)
        elif state == "D":
            a = -rng.uniform(0.7, min(4.0, 0.8 * v0 / duration))
        else:
            a = rng.uniform(-0.12, 0.12)
        if name.startswith("T"):
            sign = 1.0 if name.startswith("TL") else -1.0
            omega[man] = sign * rng.uniform(0.3, 1.0) / duration
    ax[man] = a
    t, x, y, _ = integrate_path(v0, ax, omega, rate_hz, lateral=lateral)
    track = VehicleTrack(f"{name}-{rng.integers(1 << 30)}", "small", t, x, y)
    return track, (t[n_lead], t[n_lead + n_man])


def planted_episode_track(rng: np.random.Generator, duration=120.0, rate_hz=10.0, noise=0.15):
    """Smooth cruising with one planted unsafe episode.

    Returns ``(track, (t_start, t_end), axis)`` where ``axis`` is
    ``"brake"``, ``"accel"`` or ``"lateral"``.
    """
    n = int(round(duration * rate_hz))
    kernel = np.ones(5) / 5
    ax = np.convolve(rng.normal(0, noise, n), kernel, mode="same")
    omega = np.zeros(n)
    ep_len = rng.uniform(1.5, 4.0)
    t0 = rng.uniform(10.0, duration - 10.0 - ep_len)
    i0, i1 = int(round(t0 * rate_hz)), int(round((t0 + ep_len) * rate_hz))
    kind = rng.choice(["brake", "accel", "lateral"])
    v0 = rng.uniform(18.0, 30.0)
    if kind == "brake":
        ax[i0:i1] = -rng.uniform(3.2, 5.0)
    elif kind == "accel":
        ax[i0:i1] = rng.uniform(1.8, 3.0)
    v_profile = v0 + np.concatenate(([0.0], np.cumsum(ax) / rate_hz))
    if kind == "lateral":
        a_lat = rng.uniform(4.5, 6.0) * rng.choice([-1.0, 1.0])
        omega[i0:i1] = a_lat / np.maximum(v_profile[i0:i1], 1.0)
    t, x, y, _ = integrate_path(v0, ax, omega, rate_hz)
    track = VehicleTrack(f"planted-{kind}", "small", t, x, y)
    return track, (i0 / rate_hz, i1 / rate_hz), str(kind)


def behavior_corpus(per_class: int = 200, seed: int = 0, rate_hz: float = 10.0, lane_width: float = 3.5):
    """Feature matrix and rule-oracle labels for ``per_class`` manoeuvres of each kind."""
    from .classify import LABELS, RuleConfig, extract_features, rule_label
    from .detect import UnsafeInterval
    from .kinematics import derive_kinematics

    rng = np.random.default_rng(seed)
    rule = RuleConfig(lane_width=lane_width)
    X, y = [], []
    for kind in LABELS:
        for _ in range(per_class):
            track, (a, b) = behavior_track(kind, rng, rate_hz, lane_width)
            feats = extract_features(derive_kinematics(track), UnsafeInterval(a, b, "both", 0.0, a))
            X.append(feats.to_array())
            y.append(rule_label(feats, config=rule))
    return np.array(X), y
