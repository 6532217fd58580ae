"""Speed, curvature radius and longitudinal/lateral acceleration from positions.

Derivatives use central differences, so the first and last samples of every
track are dropped. With ``(x', y')`` the velocity and ``(x'', y'')`` the
acceleration of the path:

    v   = sqrt(x'^2 + y'^2)
    a_x = (x' x'' + y' y'') / v          tangential
    a_y = (x'' y' - x' y'') / v          normal, positive for right turns
    rho = v^3 / (x'' y' - x' y'')        signed radius
"""

from __future__ import annotations

import numpy as np

from .core import KinematicTrack, VehicleTrack
from .errors import NonUniformSampling, TooShort

EPS_V = 0.1
EPS_D = 1e-9
MIN_SAMPLES = 5
DT_TOLERANCE = 1e-6


def _moving_average(values: np.ndarray, window: int = 3) -> np.ndarray:
    if window <= 1 or len(values) < window:
        return values
    half = window // 2
    padded = np.pad(values, half, mode="edge")
    return np.convolve(padded, np.ones(window) / window, mode="valid")


def sampling_interval(t: np.ndarray) -> float:
    t = np.asarray(t, dtype=float)
    if len(t) < MIN_SAMPLES:
        raise TooShort(f"{len(t)} samples, need at least {MIN_SAMPLES}")
    steps = np.diff(t)
    dt = float(steps.mean())
    if dt <= 0 or np.max(np.abs(steps - dt)) > DT_TOLERANCE:
        raise NonUniformSampling(f"sampling interval varies by {np.ptp(steps):.3g} s")
    return dt


def differentiate(track: VehicleTrack, smooth: bool = False):
    """First and second central differences of x and y.

    Returns ``(t, x, y, dx, dy, ddx, ddy)`` for the interior samples.
    """
    dt = sampling_interval(track.t)
    x = _moving_average(track.x) if smooth else track.x
    y = _moving_average(track.y) if smooth else track.y
    dx = (x[2:] - x[:-2]) / (2 * dt)
    dy = (y[2:] - y[:-2]) / (2 * dt)
    ddx = (x[2:] - 2 * x[1:-1] + x[:-2]) / dt**2
    ddy = (y[2:] - 2 * y[1:-1] + y[:-2]) / dt**2
    return track.t[1:-1], x[1:-1], y[1:-1], dx, dy, ddx, ddy


def curvature_radius(dx, dy, ddx, ddy, eps_v: float = EPS_V, eps_d: float = EPS_D) -> np.ndarray:
    """Signed radius; ``inf`` on straight segments or below ``eps_v``."""
    dx, dy, ddx, ddy = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (dx, dy, ddx, ddy)))
    speed = np.hypot(dx, dy)
    den = ddx * dy - dx * ddy
    straight = (np.abs(den) < eps_d) | (speed <= eps_v)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(straight, np.inf, speed**3 / np.where(straight, 1.0, den))
    return rho


def accelerations(dx, dy, ddx, ddy, eps_v: float = EPS_V, eps_d: float = EPS_D):
    """Return ``(v, a_x, a_y)``; both accelerations are 0 where ``v <= eps_v``."""
    dx, dy, ddx, ddy = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (dx, dy, ddx, ddy)))
    v = np.hypot(dx, dy)
    moving = v > eps_v
    safe_v = np.where(moving, v, 1.0)
    den = ddx * dy - dx * ddy
    a_x = np.where(moving, (dx * ddx + dy * ddy) / safe_v, 0.0)
    a_y = np.where(moving & (np.abs(den) >= eps_d), den / safe_v, 0.0)
    return v, a_x, a_y


def derive_kinematics(track: VehicleTrack, smooth: bool = False) -> KinematicTrack:
    t, x, y, dx, dy, ddx, ddy = differentiate(track, smooth=smooth)
    v, a_x, a_y = accelerations(dx, dy, ddx, ddy)
    rho = curvature_radius(dx, dy, ddx, ddy)
    heading = np.arctan2(dy, dx)
    return KinematicTrack(
        vehicle_id=track.vehicle_id,
        vehicle_class=track.vehicle_class,
        t=t, x=x, y=y, v=v, rho=rho, a_x=a_x, a_y=a_y, heading=heading,
        sample_rate_hz=1.0 / sampling_interval(track.t),
    )
