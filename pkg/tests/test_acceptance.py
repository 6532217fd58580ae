"""Acceptance criteria 1-10, each at its stated tolerance.

Each test records a PASS/FAIL line that is printed in the pytest terminal
summary under "acceptance criteria".
"""

import json
import time

import numpy as np
import pytest

from wzsafety.calibrate import l16_design, p1, validate
from wzsafety.classify import BehaviorLabel, dumps_model, loads_model, train
from wzsafety.core import RegionGroup, TransitionStyle, VehicleTrack, WorkZoneLayout
from wzsafety.correction import ActionKind, SafetyThresholds, correction_loop, problem_density, LANE_CHANGE
from wzsafety.data import FACTOR_LEVELS, L16, POSITION_A, POSITION_B
from wzsafety.density import DensityGridSpec, density_to_proportion, kde, kde_naive
from wzsafety.detect import extract_unsafe_segments
from wzsafety.io import (PipelineConfig, density_to_csv, detectors_to_csv, dumps, ingest_tracks, read_density,
                         read_detectors, read_segments, scenario_from_dict, scenario_to_dict, segments_to_csv,
                         tracks_to_csv)
from wzsafety.kinematics import accelerations, derive_kinematics, differentiate
from wzsafety.microsim import ScenarioConfig, run_replication
from wzsafety.pipeline import analyze, assess_replications, simulate_and_assess
from wzsafety.synth import behavior_corpus, circle_track, integrate_path, planted_episode_track

# design rows as factor values (A, B, C, D, E), typed in independently of data.L16
DESIGN_VALUES = (
    (0.5, 0.7, 3, 60, 0.5), (0.5, 0.8, 4, 80, 1.0), (0.5, 0.9, 5, 100, 1.5), (0.5, 1.0, 6, 120, 2.0),
    (1.0, 0.7, 4, 100, 2.0), (1.0, 0.8, 3, 120, 1.5), (1.0, 0.9, 6, 60, 1.0), (1.0, 1.0, 5, 80, 0.5),
    (1.5, 0.7, 5, 120, 1.0), (1.5, 0.8, 6, 100, 0.5), (1.5, 0.9, 3, 80, 2.0), (1.5, 1.0, 4, 60, 1.5),
    (2.0, 0.7, 6, 80, 1.5), (2.0, 0.8, 5, 60, 2.0), (2.0, 0.9, 4, 120, 0.5), (2.0, 1.0, 3, 100, 1.0),
)


def test_c1_proportion(verdict):
    value = density_to_proportion(5.88)
    ok = abs(value - 16.1) <= 0.05
    verdict(1, ok, f"5.88 -> {value:.4f}% (target 16.1 +/- 0.05)")
    assert ok


def test_c2_kinematics(verdict, tmp_path):
    start = time.perf_counter()
    path = tmp_path / "circle.csv"
    path.write_text(tracks_to_csv([circle_track(100.0, 20.0, duration=20.0)]))
    k = derive_kinematics(ingest_tracks(path)[0])
    ay_err = float(np.max(np.abs(np.abs(k.a_y) - 4.0)))
    ax_max = float(np.max(np.abs(k.a_x)))
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(20, 120))
        knots = rng.uniform(-3, 3, 5)
        om = rng.uniform(-0.08, 0.08, 5)
        u = np.linspace(0, 1, n)
        ax = np.interp(u, np.linspace(0, 1, 5), knots)
        omega = np.interp(u, np.linspace(0, 1, 5), om)
        t, x, y, _ = integrate_path(rng.uniform(15, 30), ax, omega)
        _, _, _, dx, dy, ddx, ddy = differentiate(VehicleTrack("r", "small", t, x, y))
        v, a_x, a_y = accelerations(dx, dy, ddx, ddy)
        total = ddx**2 + ddy**2
        m = (v > 0.1) & (total > 0)
        worst = max(worst, float(np.max(np.abs(a_x[m]**2 + a_y[m]**2 - total[m]) / total[m])))
    elapsed = time.perf_counter() - start
    ok = ay_err <= 0.05 and ax_max <= 0.05 and worst <= 1e-9
    verdict(2, ok, f"|a_y| err {ay_err:.2e}, max |a_x| {ax_max:.2e}, Pythagorean rel {worst:.1e} over 1000 tracks, "
                   f"{elapsed:.1f}s")
    assert ok


def test_c3_endpoints(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    cover = planted = false = clean = 0.0
    for _ in range(500):
        tr, (a, b), _ = planted_episode_track(rng)
        k = derive_kinematics(tr)
        ivs = extract_unsafe_segments(k)
        hit = sum(max(0.0, min(b, iv.t_end) - max(a, iv.t_start)) for iv in ivs)
        cover += hit
        planted += b - a
        false += sum(iv.duration for iv in ivs) - hit
        clean += (k.t[-1] - k.t[0]) - (b - a)
    elapsed = time.perf_counter() - start
    ok = cover / planted >= 0.95 and false / clean <= 0.05
    verdict(3, ok, f"coverage {cover / planted:.4f}, false-positive share {false / clean:.4f}, {elapsed:.1f}s")
    assert ok


def test_c4_classifier(verdict):
    start = time.perf_counter()
    X, y = behavior_corpus(per_class=250, seed=11)
    rng = np.random.default_rng(11)
    order = rng.permutation(len(y))
    n_test = len(y) // 5
    test, fit = order[:n_test], order[n_test:]
    model = train(X[fit], [y[i] for i in fit], seed=11)
    pred = model.predict_many(X[test])
    acc = float(np.mean([p == y[i] for p, i in zip(pred, test)]))
    elapsed = time.perf_counter() - start
    ok = len(y) >= 2200 and len(set(y)) == 11 and acc >= 0.95
    verdict(4, ok, f"held-out agreement {acc:.4f} on {n_test} of {len(y)} segments, {elapsed:.1f}s")
    assert ok


def test_c5_kde(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    spec = DensityGridSpec(0.0, 600.0, -40.0, 60.0)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 60))
        pts = np.column_stack([rng.uniform(-20, 620, n), rng.uniform(-50, 70, n)])
        w = rng.uniform(0.2, 3.0, n)
        a, b = kde(pts, spec, w).values, kde_naive(pts, spec, w)
        scale = max(float(np.abs(b).max()), 1e-300)
        worst = max(worst, float(np.max(np.abs(a - b))) / scale)
    interior = np.column_stack([rng.uniform(50, 550, 80), rng.uniform(-5, 25, 80)])
    mass = kde(interior, spec).total_mass()
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and abs(mass - 80) / 80 <= 0.02
    verdict(5, ok, f"max relative diff {worst:.1e}, mass {mass:.3f} for 80 points, {elapsed:.1f}s")
    assert ok


def test_c6_calibration_math(verdict):
    value = p1(POSITION_B["small"], POSITION_A["small"])
    design = l16_design()
    as_values = tuple(tuple(FACTOR_LEVELS[f][lv - 1] for f, lv in enumerate(row)) for row in design)
    counts_ok = all(sum(1 for row in design if row[f] == lv) == 4 for f in range(5) for lv in range(1, 5))
    ok = abs(value - 1.01) <= 1e-9 and as_values == DESIGN_VALUES and tuple(design) == L16 and counts_ok
    verdict(6, ok, f"p1 {value:.12f}, design values match {as_values == DESIGN_VALUES}, balanced {counts_ok}")
    assert ok


@pytest.mark.xfail(strict=True, reason="0.7 / 75.7 = 0.924703%, which is 0.925 only after rounding to 3 decimals; "
                                       "the 1e-6 tolerance cannot hold (see ledger)")
def test_c6_relative_error_literal(verdict):
    xi = validate(75.0, 75.7)
    ok = abs(xi - 0.925) <= 1e-6
    verdict(6, ok, f"xi(75.7, 75.0) = {xi:.6f}% vs 0.925 +/- 1e-6")
    assert ok


@pytest.mark.slow
def test_c7_simulator_invariants(verdict):
    start = time.perf_counter()
    failures = []
    worst = 0.0
    for seed in range(1, 21):
        cfg = ScenarioConfig(sim_duration=1800.0, seed=seed, replications=1)
        try:
            res = run_replication(cfg, check=True)
        except Exception as exc:  # any invariant error is a failed seed
            failures.append(f"seed {seed}: {exc}")
            continue
        negative = any(np.any(tr.v < 0) for tr in res.tracks)
        rel = abs(res.throughput - 1760.0) / 1760.0
        worst = max(worst, rel)
        if negative or rel > 0.10:
            failures.append(f"seed {seed}: throughput {res.throughput:.0f}, negative speed {negative}")
    elapsed = time.perf_counter() - start
    ok = not failures
    verdict(7, ok, f"20 seeds x 1800 s checked every step, worst throughput deviation {worst:.3f}, "
                   f"{elapsed:.0f}s" + (f"; {failures}" if failures else ""))
    assert ok, failures


def _scenarios():
    base = WorkZoneLayout()
    return {
        "stepped": ScenarioConfig(),
        "gradual90": ScenarioConfig(layout=base.replace(upstream_transition_style=TransitionStyle.GRADUAL,
                                                        upstream_transition_length=90.0)),
        "limit40": ScenarioConfig(warning_speed_limit=40.0),
        "warning300": ScenarioConfig(layout=base.replace(warning_length=300.0)),
        "warning700": ScenarioConfig(layout=base.replace(warning_length=700.0)),
    }


@pytest.mark.slow
def test_c8_scenario_trends(verdict):
    start = time.perf_counter()
    reports = {name: simulate_and_assess(cfg)[0] for name, cfg in _scenarios().items()}
    up, term = RegionGroup.UPSTREAM, RegionGroup.TERMINATION

    def d(name, label, group=up):
        return reports[name].density(label, group)

    tlcl, ld, la = BehaviorLabel.TLCL, BehaviorLabel.LD, BehaviorLabel.LA
    a = d("gradual90", tlcl) < d("stepped", tlcl)
    b = d("limit40", ld) > d("stepped", ld) and d("limit40", tlcl) < d("stepped", tlcl)
    appears = {name: d(name, la, term) >= 0.1 for name in reports}
    c = appears["limit40"] and not any(v for k, v in appears.items() if k != "limit40")
    change = abs(d("warning700", ld) - d("warning300", ld)) / d("warning300", ld) if d("warning300", ld) else float("inf")
    dd = change < 0.25
    elapsed = time.perf_counter() - start
    detail = (f"(a) TL&CL gradual {d('gradual90', tlcl):.2f} < stepped {d('stepped', tlcl):.2f}: {a}; "
              f"(b) L&D 40 {d('limit40', ld):.2f} > {d('stepped', ld):.2f} and TL&CL 40 {d('limit40', tlcl):.2f}: {b}; "
              f"(c) termination L&A " + ", ".join(f"{k} {d(k, la, term):.2f}" for k in reports) + f": {c}; "
              f"(d) L&D 300 {d('warning300', ld):.2f} vs 700 {d('warning700', ld):.2f} ({change:.1%}): {dd}; "
              f"{elapsed:.0f}s")
    ok = a and b and c and dd
    verdict(8, ok, detail)
    assert ok, detail


@pytest.mark.slow
def test_c9_correction_loop(verdict):
    start = time.perf_counter()
    result = correction_loop(ScenarioConfig(sim_duration=1200.0), SafetyThresholds(lane_change=1.0), max_iters=5)
    history = result.history
    first = problem_density(history[0].report, LANE_CHANGE)[0]
    last = problem_density(history[-1].report, LANE_CHANGE)[0]
    steps = {ActionKind.RAISE_LIMIT: 10.0, ActionKind.LOWER_LIMIT: -10.0, ActionKind.LENGTHEN_TRANSITION: 30.0,
             ActionKind.SWITCH_TO_GRADUAL: None}
    actions = [it.action for it in history if it.action is not None]
    matrix_ok = all(a.kind in steps and a.step == steps[a.kind] for a in actions)
    # each applied action must show up as exactly that change in the next layout
    applied_ok = True
    for prev, nxt in zip(history, history[1:]):
        a = prev.action
        if a.kind is ActionKind.LENGTHEN_TRANSITION:
            applied_ok &= nxt.layout.upstream_transition_length - prev.layout.upstream_transition_length == 30.0
        elif a.kind is ActionKind.SWITCH_TO_GRADUAL:
            applied_ok &= nxt.layout.upstream_transition_style is TransitionStyle.GRADUAL
    elapsed = time.perf_counter() - start
    ok = first > 1.0 and len(history) <= 5 and last < first and matrix_ok and applied_ok
    trail = ", ".join(a.kind.value for a in actions)
    verdict(9, ok, f"{len(history)} iteration(s), verdict {result.verdict}, lane-change peak {first:.2f} -> {last:.2f}, "
                   f"actions [{trail}], {elapsed:.0f}s")
    assert ok


def test_c10_determinism_and_round_trips(verdict, tmp_path):
    start = time.perf_counter()
    cfg = ScenarioConfig(sim_duration=300.0, warmup=60.0, seed=9, replications=1)
    runs = [run_replication(cfg) for _ in range(2)]
    tracks_same = tracks_to_csv(runs[0].tracks) == tracks_to_csv(runs[1].tracks)
    det_same = detectors_to_csv(runs[0].detectors) == detectors_to_csv(runs[1].detectors)
    analyses = [analyze(r.tracks, cfg.effective_layout) for r in runs]
    seg_same = segments_to_csv(analyses[0].segments) == segments_to_csv(analyses[1].segments)
    reports = [dumps(assess_replications([a], cfg.effective_layout).to_dict()) for a in analyses]
    report_same = reports[0] == reports[1]

    def trip(name, text, read, write):
        p = tmp_path / name
        p.write_text(text)
        return write(read(p)) == text

    trips = {
        "tracks": trip("t.csv", tracks_to_csv(runs[0].tracks), ingest_tracks, tracks_to_csv),
        "detectors": trip("d.csv", detectors_to_csv(runs[0].detectors), read_detectors, detectors_to_csv),
        "segments": trip("s.csv", segments_to_csv(analyses[0].segments), read_segments, segments_to_csv),
        "density": all(trip(f"f{i}.csv", density_to_csv(f), read_density, density_to_csv)
                       for i, f in enumerate(analyses[0].fields.values())),
        "scenario": dumps(scenario_to_dict(scenario_from_dict(json.loads(dumps(scenario_to_dict(cfg)))))) ==
                    dumps(scenario_to_dict(cfg)),
        "pipeline": dumps(PipelineConfig.from_dict(json.loads(dumps(PipelineConfig(scenario=cfg).to_dict()))).to_dict())
                    == dumps(PipelineConfig(scenario=cfg).to_dict()),
    }
    X, y = behavior_corpus(per_class=25, seed=1)
    model_text = dumps_model(train(X, y, epochs=200))
    trips["model"] = dumps_model(loads_model(model_text)) == model_text
    elapsed = time.perf_counter() - start
    same = tracks_same and det_same and seg_same and report_same
    ok = same and all(trips.values())
    verdict(10, ok, f"identical outputs {same}; round trips " + ", ".join(f"{k} {v}" for k, v in trips.items())
            + f"; {elapsed:.1f}s")
    assert ok
