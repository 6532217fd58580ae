import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wzsafety.core import KinematicTrack, VehicleTrack
from wzsafety.detect import (DetectionConfig, EnergySeries, detect_endpoints, endpoint_frames,
                             extract_unsafe_segments, short_time_energy, t1_adaptive, t2_from_threshold)
from wzsafety.errors import TooShort
from wzsafety.kinematics import derive_kinematics
from wzsafety.synth import integrate_path, planted_episode_track


def energies(values):
    values = np.asarray(values, float)
    return EnergySeries(np.arange(len(values)) * 0.1, values, 10, 1)


def test_constant_signal_energy():
    e = short_time_energy(np.full(40, 1.25), 10, 1)
    assert np.allclose(e.energy, 15.625)


def test_zero_signal_energy():
    assert np.all(short_time_energy(np.zeros(30), 10, 2).energy == 0)


def test_impulse_energy():
    a = np.zeros(50)
    a[20] = 3.0
    e = short_time_energy(a, 10, 1).energy
    hit = [k for k in range(len(e)) if k <= 20 < k + 10]
    assert np.allclose(e[hit], 9.0)
    assert np.allclose(np.delete(e, hit), 0.0)


def test_signal_shorter_than_window():
    with pytest.raises(TooShort):
        short_time_energy(np.zeros(5), 10, 1)


@pytest.mark.parametrize("a, w, expected", [(1.25, 10, 15.625), (3.6, 10, 129.6), (2.5, 20, 125.0)])
def test_t2_values(a, w, expected):
    assert t2_from_threshold(a, w) == pytest.approx(expected, rel=1e-12)


def test_t1_rank():
    assert t1_adaptive(energies(np.arange(10, 0, -1))) == 8.0


def test_t1_constant_and_single():
    assert t1_adaptive(energies([4.0] * 7)) == 4.0
    assert t1_adaptive(energies([2.5])) == 2.5


def test_t1_floor_and_cap():
    assert t1_adaptive(energies([0.0] * 10), t2=50.0) == pytest.approx(5.0)
    assert t1_adaptive(energies([100.0] * 10), t2=50.0) == 50.0


def test_threshold_extension():
    assert endpoint_frames([0, 0, 5, 20, 20, 5, 0], 3, 15) == [(2, 5)]


def test_no_core_no_interval():
    assert endpoint_frames([0, 10, 10, 0], 3, 15) == []


def test_bridge_merges_cores():
    assert endpoint_frames([0, 20, 5, 5, 20, 0], 3, 15) == [(1, 4)]
    assert endpoint_frames([0, 20, 0, 5, 20, 0], 3, 15) == [(1, 1), (3, 4)]
    assert endpoint_frames([0, 20, 0, 0, 20, 0], 3, 15) == [(1, 1), (4, 4)]


def _brute(e, t1, t2):
    out = []
    k = 0
    while k < len(e):
        if e[k] >= t1:
            j = k
            while j + 1 < len(e) and e[j + 1] >= t1:
                j += 1
            if max(e[k:j + 1]) >= t2:
                out.append((k, j))
            k = j + 1
        else:
            k += 1
    return out


@given(st.lists(st.floats(0, 40), min_size=1, max_size=60), st.floats(0, 20), st.floats(0, 20))
def test_endpoints_match_brute_force(e, t1, dt):
    t2 = t1 + dt
    assert endpoint_frames(e, t1, t2) == _brute(e, t1, t2)


def test_interval_times_use_half_hop():
    iv = detect_endpoints(energies([0, 0, 5, 20, 20, 5, 0]), 3, 15)
    assert len(iv) == 1
    assert iv[0].t_start == pytest.approx(0.15) and iv[0].t_end == pytest.approx(0.55)
    assert iv[0].peak_energy == 20 and iv[0].t_peak == pytest.approx(0.3)


def _ktrack(ax, ay, rate=10.0):
    n = len(ax)
    t = np.arange(n) / rate
    z = np.zeros(n)
    v = 20 + np.concatenate(([0.0], np.cumsum(ax[:-1]) / rate))
    return KinematicTrack("k", "small", t, np.cumsum(v) / rate, z, v, np.full(n, np.inf),
                          np.asarray(ax, float), np.asarray(ay, float), z, rate)


def test_hard_brake_single_longitudinal_interval():
    n = 300
    ax = 0.05 * np.sin(np.arange(n) / 7.0)
    ax[100:115] = -3.0
    ivs = extract_unsafe_segments(_ktrack(ax, np.zeros(n)))
    assert len(ivs) == 1
    iv = ivs[0]
    assert iv.trigger_axis == "longitudinal"
    assert iv.t_start <= 10.0 and iv.t_end >= 11.4
    assert iv.t_start >= 10.0 - 1.0 and iv.t_end <= 11.5 + 1.0


def test_comfort_bounded_track_is_clean():
    n = 400
    rng = np.random.default_rng(1)
    ax = np.clip(rng.normal(0, 0.4, n), -0.8, 0.8)
    ay = np.clip(rng.normal(0, 0.5, n), -1.0, 1.0)
    assert extract_unsafe_segments(_ktrack(ax, ay)) == []


def test_brake_and_swerve_report_both():
    n = 300
    ax = np.zeros(n)
    ay = np.zeros(n)
    ax[100:120] = -3.5
    ay[102:122] = 4.5
    ivs = extract_unsafe_segments(_ktrack(ax, ay))
    assert len(ivs) == 1 and ivs[0].trigger_axis == "both"


def test_short_track_yields_nothing():
    assert extract_unsafe_segments(_ktrack(np.zeros(5), np.zeros(5))) == []


@given(st.floats(0.3, 3.0))
def test_energy_scales_quadratically(c):
    a = np.sin(np.arange(60) / 3.0) * 2.0
    e0 = short_time_energy(a, 10, 1).energy
    e1 = short_time_energy(c * a, 10, 1).energy
    assert np.allclose(e1, c * c * e0, rtol=1e-9, atol=1e-12)


@given(st.lists(st.floats(-1.2, 1.2), min_size=30, max_size=120))
def test_within_comfort_band_is_never_unsafe(ax):
    # every |a| below all three limits: no frame can reach any T2
    ax = np.asarray(ax)
    ay = np.roll(ax, 3) * 2.5
    assert extract_unsafe_segments(_ktrack(ax, ay)) == []


def test_planted_episodes_recovered():
    rng = np.random.default_rng(11)
    cover = planted = false = clean = 0.0
    for _ in range(60):
        tr, (a, b), _ = planted_episode_track(rng)
        k = derive_kinematics(tr)
        ivs = extract_unsafe_segments(k)
        hit = sum(max(0.0, min(b, iv.t_end) - max(a, iv.t_start)) for iv in ivs)
        cover += hit
        planted += b - a
        false += sum(iv.duration for iv in ivs) - hit
        clean += (k.t[-1] - k.t[0]) - (b - a)
    assert cover / planted >= 0.95
    assert false / clean <= 0.05


def test_config_validation():
    with pytest.raises(ValueError):
        DetectionConfig(hop_s=2.0)
    with pytest.raises(ValueError):
        DetectionConfig(t1_percentile=1.5)
