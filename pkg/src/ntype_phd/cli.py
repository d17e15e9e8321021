"""Command line entry point: ``ntype-phd {simulate,track,evaluate}``.

Every subcommand reads and writes plain files, so the stages compose:

    ntype-phd simulate --preset football3 --seed 3 --out run
    ntype-phd track --preset football3 --detections run/detections.csv --truth run/truth.csv --out run/ntype
    ntype-phd evaluate --estimates run/ntype/estimates.csv --truth run/truth.csv --out run/eval
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from . import io
from .config import FORMATS, MODES, ConfigError, config_from_dict, save_config
from .metrics import summarize
from .runner import evaluate, run_tracking
from .sim import simulate

log = logging.getLogger("ntype_phd")


def _raw_config(args) -> tuple[dict, Path | None]:
    """YAML file contents (if any) overlaid with explicit command line flags."""
    data, base = {}, None
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            data = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: not valid YAML ({e})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        base = path.parent
    overlay = {
        "preset": args.preset,
        "seed": args.seed,
        "out": args.out,
        "detections_format": getattr(args, "format", None),
        "mode": getattr(args, "mode", None),
        "replicates": getattr(args, "replicates", None),
        "detections": getattr(args, "detections", None),
        "truth": getattr(args, "truth", None),
    }
    for k, v in overlay.items():
        if v is not None:
            data[k] = v
    # a preset given on the command line replaces any scenario from the file
    if args.preset is not None and args.config:
        data.pop("scenario", None)
    return data, base


def cmd_simulate(args) -> int:
    data, base = _raw_config(args)
    data.pop("detections", None)
    data.pop("truth", None)
    cfg = config_from_dict(data, base_dir=base, check_files=False)
    if cfg.scenario is None:
        raise ConfigError("simulate needs a preset or a scenario section")
    truth, dets = simulate(cfg.scenario)
    out = Path(cfg.out)
    io.write_truth_csv(out / "truth.csv", truth)
    io.write_detections_csv(out / "detections.csv", dets, provenance=args.provenance)
    save_config(cfg, out / "config.yaml")
    n_det = sum(len(f) for per in dets for f in per)
    print(f"wrote {len(truth)} frames, {n_det} detections to {out}")
    return 0


def cmd_track(args) -> int:
    data, base = _raw_config(args)
    cfg = config_from_dict(data, base_dir=base)
    result = run_tracking(cfg)
    out = Path(cfg.out)
    save_config(cfg, out / "config.yaml")
    if cfg.mode == "compare":
        print(f"{'method':<12} {'OSPA':>9} {'card err':>9} {'disc':>7} {'ms/frame':>9}")
        for mode, row in result["methods"].items():
            print(
                f"{mode:<12} {row.get('mean_ospa', float('nan')):9.3f} {row.get('mean_card_err', float('nan')):9.3f}"
                f" {row.get('discrimination_rate', float('nan')):7.3f} {1e3 * row['time_per_frame']:9.2f}"
            )
        for metric, tests in result["sign_tests"].items():
            print(metric, " ".join(f"{k}: p={v:.2e}" for k, v in tests.items()))
    else:
        print(json.dumps(result, indent=2))
    return 0


def cmd_evaluate(args) -> int:
    from .config import MetricSettings

    metrics = MetricSettings(p=args.p, c=args.c, gate=args.gate)
    if metrics.p < 1 or metrics.c <= 0 or metrics.gate <= 0:
        raise ConfigError("need p >= 1 and positive c and gate")
    for p in (args.estimates, args.truth):
        if not Path(p).exists():
            raise ConfigError(f"file {p} does not exist")
    rows = io.read_estimates_csv(args.estimates)
    truth = io.read_truth_csv(args.truth)
    records = evaluate(rows, truth, metrics)
    out = Path(args.out)
    io.write_metrics_csv(out / "metrics.csv", records)
    summary = summarize(records)
    io.write_text_atomic(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ntype-phd", description="Multi-type GM-PHD tracking with detector confusion.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--preset", help="named scenario: football3, urban2, single")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("simulate", help="scenario -> truth.csv + detections.csv")
    common(p)
    p.add_argument("--provenance", action="store_true", help="add a provenance column (true/confusion/clutter)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", help="detections + config -> estimates, metrics, summary")
    common(p)
    p.add_argument("--detections", help="detection file; without it the scenario is simulated")
    p.add_argument("--truth", help="truth CSV for metrics")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--replicates", type=int, help="Monte-Carlo replicates (compare mode)")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("evaluate", help="estimates + truth -> metrics")
    p.add_argument("--estimates", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", default="runs/eval")
    p.add_argument("--p", type=float, default=1.0, help="OSPA order")
    p.add_argument("--c", type=float, default=100.0, help="OSPA cutoff, pixels")
    p.add_argument("--gate", type=float, default=50.0, help="discrimination gate, pixels")
    p.set_defaults(func=cmd_evaluate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, io.FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
