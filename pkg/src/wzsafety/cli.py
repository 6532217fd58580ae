"""Command-line entry point.

Exit codes: 0 success, 1 invalid input (including usage errors), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ValidationError, WorkZoneError


class _UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: {message}")


def _load_layout(path):
    from .io import layout_from_dict, read_json, scenario_from_dict

    data = read_json(path)
    if "scenario" in data:
        data = data["scenario"]
    if "layout" in data and isinstance(data["layout"], dict):
        return scenario_from_dict(data).effective_layout
    return layout_from_dict(data)


def _load_scenario(path):
    from .io import read_json, scenario_from_dict
    from .microsim import ScenarioConfig

    if path is None:
        return ScenarioConfig()
    data = read_json(path)
    return scenario_from_dict(data.get("scenario", data) if "scenario" in data else data)


def _load_analysis(path):
    from .io import analysis_from_dict, read_json
    from .pipeline import AnalysisConfig

    if path is None:
        return AnalysisConfig()
    data = read_json(path)
    return analysis_from_dict(data.get("analysis", data) if "analysis" in data else data)


def _load_model(path):
    from .classify import ClassifierModel

    return None if path is None else ClassifierModel.load(path)


def cmd_simulate(args) -> int:
    from .io import detectors_to_csv, write_tracks
    from .microsim import run_replication

    cfg = _load_scenario(args.scenario)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.duration is not None:
        changes["sim_duration"] = args.duration
    if changes:
        cfg = cfg.replace(**changes)
    result = run_replication(cfg, args.replication, check=args.check)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_tracks(out, result.tracks)
    if args.detectors:
        Path(args.detectors).write_text(detectors_to_csv(result.detectors))
    s = result.stats
    print(f"{len(result.tracks)} tracks, throughput {result.throughput:.0f} veh/h, "
          f"{s.removed} removed, {s.lane_changes} lane changes -> {out}", file=sys.stderr)
    return 0


def cmd_analyze(args) -> int:
    from .io import ingest_tracks, write_density, write_segments
    from .pipeline import analyze
    from .render import render_heatmap

    layout = _load_layout(args.layout)
    config = _load_analysis(args.config)
    tracks = ingest_tracks(args.tracks)
    result = analyze(tracks, layout, config, _load_model(args.classifier))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_segments(out / "segments.csv", result.segments)
    for label, fld in result.fields.items():
        write_density(out / f"density_{label.slug}.csv", fld)
        if not args.no_maps:
            render_heatmap(fld, layout, out / f"map_{label.slug}", png=args.png, min_peak=config.min_peak)
    print(f"{len(result.segments)} unsafe segments from {result.n_vehicles} vehicles, "
          f"{len(result.fields)} labels -> {out}", file=sys.stderr)
    return 0


def cmd_assess(args) -> int:
    from .correction import SafetyThresholds, assess, thresholds_from_dict
    from .density import build_report
    from .io import dumps, read_density, read_json

    layout = _load_layout(args.layout)
    config = _load_analysis(args.config)
    replications = []
    for d in args.density:
        d = Path(d)
        files = sorted(d.glob("density_*.csv")) if d.is_dir() else [d]
        fields_ = {}
        for f in files:
            fld = read_density(f)
            if fld.label is None:
                raise ValidationError(f"{f}: density file carries no label")
            fields_[fld.label] = fld
        replications.append(fields_)
    report = build_report(replications, layout, config.min_peak, {"sources": [str(d) for d in args.density]})
    thresholds = thresholds_from_dict(read_json(args.thresholds)) if args.thresholds else SafetyThresholds()
    data = report.to_dict()
    data["flags"] = [f.to_dict() for f in assess(report, thresholds)]
    Path(args.out).write_text(dumps(data))
    return 0


def cmd_correct_loop(args) -> int:
    from .correction import correction_loop
    from .io import PipelineConfig, read_json

    cfg_path = Path(args.config)
    cfg = PipelineConfig.from_dict(read_json(cfg_path), base=cfg_path.parent)
    model = _load_model(cfg.classifier)
    result = correction_loop(cfg.scenario, cfg.thresholds, args.max_iters, cfg.analysis, cfg.bounds, model)
    out = Path(args.out) if args.out else Path(cfg.output) / "history.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(result.to_json())
    print(f"verdict {result.verdict} after {len(result.history)} iteration(s) -> {out}", file=sys.stderr)
    return 0


def cmd_calibrate(args) -> int:
    from .calibrate import SpeedObservation, calibrate
    from .io import read_json

    actual = SpeedObservation.from_dict(read_json(args.observations)) if args.observations else SpeedObservation.site()
    template = _load_scenario(args.scenario)
    if args.scenario is None:
        template = template.replace(replications=1, sim_duration=900.0)
    if args.duration is not None:
        template = template.replace(sim_duration=args.duration)
    result = calibrate(actual, template, mode=args.mode, workers=args.workers)
    Path(args.out).write_text(result.to_json())
    verdict = "n/a" if result.validation is None else ("pass" if result.validation.passed else "fail")
    print(f"best levels {result.best}, validation {verdict} -> {args.out}", file=sys.stderr)
    return 0


def cmd_train_classifier(args) -> int:
    from .classify import train
    from .synth import behavior_corpus

    if args.segments:
        from .io import read_segments

        segs = read_segments(args.segments)
        X = np.array([s.features.to_array() for s in segs])
        y = [s.label for s in segs]
    else:
        X, y = behavior_corpus(args.per_class, args.seed)
    if len(y) == 0:
        raise ValidationError("no training examples")
    rng = np.random.default_rng(args.seed)
    order = rng.permutation(len(y))
    n_test = int(round(len(y) * args.holdout))
    test, fit = order[:n_test], order[n_test:]
    model = train(X[fit], [y[i] for i in fit], seed=args.seed)
    model.save(args.out)
    if n_test:
        pred = model.predict_many(X[test])
        acc = float(np.mean([p == y[i] for p, i in zip(pred, test)]))
        print(f"held-out agreement {acc:.4f} on {n_test} segments -> {args.out}", file=sys.stderr)
    return 0


def cmd_render(args) -> int:
    from .io import read_density
    from .render import render_heatmap

    layout = _load_layout(args.layout)
    fld = read_density(args.density)
    render_heatmap(fld, layout, args.out, png=args.png, min_peak=args.min_peak)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wzsafety", description="Work-zone safety assessment and correction.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--json-errors", action="store_true", help="report failures as JSON on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate a scenario and write its tracks")
    s.add_argument("--scenario", help="scenario JSON (default: built-in scenario)")
    s.add_argument("--seed", type=int)
    s.add_argument("--replication", type=int, default=0)
    s.add_argument("--duration", type=float, help="simulated seconds after warmup")
    s.add_argument("--out", required=True)
    s.add_argument("--detectors", help="also write detector passages to this CSV")
    s.add_argument("--check", action="store_true", help="verify invariants at every step")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("analyze", help="tracks -> unsafe segments, density grids and maps")
    s.add_argument("--tracks", required=True)
    s.add_argument("--layout", required=True, help="layout, scenario or pipeline JSON")
    s.add_argument("--config", help="analysis JSON")
    s.add_argument("--classifier", help="trained model file (default: rule cascade)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--png", action="store_true", help="also write matplotlib figures")
    s.add_argument("--no-maps", action="store_true")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("assess", help="density grids -> peak-density report")
    s.add_argument("--density", nargs="+", required=True,
                   help="one directory of density CSVs (or one CSV) per replication")
    s.add_argument("--layout", required=True)
    s.add_argument("--config", help="analysis JSON")
    s.add_argument("--thresholds", help="thresholds JSON for the flag list")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_assess)

    s = sub.add_parser("correct-loop", help="assess and adjust the layout until safe")
    s.add_argument("--config", required=True, help="pipeline JSON")
    s.add_argument("--max-iters", type=int, default=5)
    s.add_argument("--out", help="history JSON (default: <output>/history.json)")
    s.set_defaults(func=cmd_correct_loop)

    s = sub.add_parser("calibrate", help="orthogonal-design calibration of driving parameters")
    s.add_argument("--observations", help="observation JSON (default: built-in site data)")
    s.add_argument("--scenario", help="scenario template JSON")
    s.add_argument("--duration", type=float)
    s.add_argument("--mode", choices=("literal", "abs"), default="literal")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("train-classifier", help="fit the linear behaviour classifier")
    s.add_argument("--segments", help="labelled segments CSV (default: synthetic corpus)")
    s.add_argument("--per-class", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--holdout", type=float, default=0.2)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_classifier)

    s = sub.add_parser("render", help="density CSV -> PGM + SVG overlay")
    s.add_argument("--density", required=True)
    s.add_argument("--layout", required=True)
    s.add_argument("--out", required=True, help="output path without extension")
    s.add_argument("--png", action="store_true")
    s.add_argument("--min-peak", type=float, default=0.1)
    s.set_defaults(func=cmd_render)
    return p


def _report(exc: Exception, code: int, as_json: bool) -> int:
    if as_json:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), file=sys.stderr)
    else:
        print(f"error: {exc}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    as_json = "--json-errors" in argv
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ValidationError, ValueError) as exc:
        return _report(exc, 1, as_json)
    except (WorkZoneError, OSError) as exc:
        return _report(exc, 2, as_json)
