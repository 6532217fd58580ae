"""Site observations and the calibration design used as reference inputs."""

from __future__ import annotations

from .microsim import SpeedDistribution

CONTROL_POINTS = (35.0, 45.0, 55.0, 65.0, 75.0, 85.0, 95.0, 105.0, 110.0)

# Cumulative speed distributions measured upstream (A, undisturbed) and inside the zone (B).
POSITION_A = {
    "small": SpeedDistribution(CONTROL_POINTS, (0, 0.01, 0.03, 0.04, 0.2, 0.76, 0.85, 0.96, 1)),
    "large": SpeedDistribution(CONTROL_POINTS, (0, 0, 0, 0, 0, 0.43, 0.88, 0.98, 1)),
}
POSITION_B = {
    "small": SpeedDistribution(CONTROL_POINTS, (0, 0.01, 0.09, 0.28, 0.65, 0.86, 0.97, 1, 1)),
    "large": SpeedDistribution(CONTROL_POINTS, (0, 0.02, 0.07, 0.30, 0.63, 0.84, 0.93, 0.98, 1)),
}

# Mean spot speeds at B (km/h): small, large, all.
POSITION_B_MEANS = (75.4, 76.4, 75.7)
SITE_VOLUME = 1760.0
SITE_LARGE_FRACTION = 0.22
ROAD_SPEED_LIMIT = 80.0

# Candidate values per factor: standstill distance, headway time, following
# variation, waiting time before diffusion, minimum headway.
FACTOR_NAMES = ("cc0_standstill", "cc1_headway", "cc2_variation", "diffusion_wait", "min_headway")
FACTOR_LEVELS = (
    (0.5, 1.0, 1.5, 2.0),
    (0.7, 0.8, 0.9, 1.0),
    (3.0, 4.0, 5.0, 6.0),
    (60.0, 80.0, 100.0, 120.0),
    (0.5, 1.0, 1.5, 2.0),
)

# Level indices (1-based) of the 16-run orthogonal design.
L16 = (
    (1, 1, 1, 1, 1),
    (1, 2, 2, 2, 2),
    (1, 3, 3, 3, 3),
    (1, 4, 4, 4, 4),
    (2, 1, 2, 3, 4),
    (2, 2, 1, 4, 3),
    (2, 3, 4, 1, 2),
    (2, 4, 3, 2, 1),
    (3, 1, 3, 4, 2),
    (3, 2, 4, 3, 1),
    (3, 3, 1, 2, 4),
    (3, 4, 2, 1, 3),
    (4, 1, 4, 2, 3),
    (4, 2, 3, 1, 4),
    (4, 3, 2, 4, 1),
    (4, 4, 1, 3, 2),
)

BEST_LEVELS = (3, 1, 2, 2, 1)

# Peak densities per scenario (upstream columns plus L&A in the termination area).
REFERENCE_PEAKS = {
    "warning-300": {"L&A": 1.83, "L&D": 4.36, "TR&D": 0.80},
    "warning-500": {"L&A": 2.57, "TR&A": 0.63, "L&D": 4.73, "TR&D": 0.73, "TL&CL": 5.25},
    "warning-700": {"L&A": 2.72, "TR&A": 0.58, "L&D": 4.73, "TR&D": 0.63, "TL&CL": 5.08},
    "limit-70": {"L&A": 2.50, "L&D": 4.96, "TR&D": 0.85, "TL&CL": 5.92, "L&A@termination": 5.23},
    "limit-60": {"L&A": 3.13, "TR&A": 0.53, "L&D": 5.58, "TR&D": 1.04, "TL&CL": 2.83, "L&A@termination": 6.76},
    "limit-50": {"L&A": 5.35, "L&D": 7.63, "TR&D": 1.02, "TL&CL": 0.59, "L&A@termination": 2.42},
    "limit-40": {"L&A": 6.78, "L&D": 8.14, "TL&D": 0.71, "TR&D": 0.75, "L&A@termination": 3.42},
    "gradual-30": {"L&A": 0.84, "L&D": 1.42, "TL&CL": 6.13},
    "gradual-60": {"L&A": 1.21, "L&D": 2.76, "TL&D": 0.57, "TR&D": 0.63, "TL&CL": 1.03},
    "gradual-90": {"L&A": 0.82, "L&D": 0.85},
    "work-300": {"L&A": 1.94, "TR&A": 0.63, "L&D": 4.20, "TL&CL": 5.50},
}
