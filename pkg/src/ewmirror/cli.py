"""Command-line front end.

    ewmirror predict    --config cfg.json [--out DIR]
    ewmirror sweep      --config cfg.json --axis detuning --from 31 --to 233 --points 20
    ewmirror pipeline   --config cfg.json --out DIR [--seed N] [--threads N]
    ewmirror thresholds --config cfg.json
    ewmirror verify     [--rows thresholds,5]

Exit codes: 0 success, 1 usage or configuration error, 2 physically
infeasible (no bounce, no signal), 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import fileio
from .config import ExperimentConfig, default_config, load_config
from .errors import EwMirrorError
from .pipeline import (
    BUDGET_COLUMNS,
    THRESHOLD_COLUMNS,
    budget,
    budget_row,
    run_pipeline,
    sweep,
    threshold_report,
)

log = logging.getLogger("ewmirror")

SUMMARY_COLUMNS = ["vx_pre", "vx_post", "delta_vx", "recoils", "recoils_err", "recoils_uncorrected",
                   "intercept_mismatch_mm", "truth_n_corrected", "truth_ensemble",
                   "bounce_fraction", "no_signal"]
FRAME_COLUMNS = ["t_ms", "x_mm", "z_mm", "x_err_mm", "n_atoms", "used"]


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "out", None):
        cfg = replace(cfg, output_dir=args.out)
    return cfg


def _emit(rows, columns, out: str | None, name: str):
    text = fileio.csv_text(rows, columns)
    sys.stdout.write(text)
    if out:
        path = fileio.write_atomic(Path(out) / name, text)
        log.info("wrote %s", path)


def cmd_predict(args) -> int:
    cfg = _config(args)
    budget(cfg)  # raises NoBounceError with a threshold hint
    _emit([budget_row(cfg)], BUDGET_COLUMNS, args.out, "predict.csv")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.start is None or args.stop is None:
        raise EwMirrorError("sweep needs --from and --to")
    rows = sweep(cfg, args.axis, args.start, args.stop, args.points, threads=args.threads)
    for r in rows:
        if not r["bounces"]:
            log.warning("no bounce at delta=%.4g Gamma, xi=%.4g um", r["delta_over_Gamma"], r["xi_um"])
    _emit(rows, BUDGET_COLUMNS, args.out, f"sweep_{args.axis}.csv")
    return 0


def cmd_thresholds(args) -> int:
    cfg = _config(args)
    _emit(threshold_report(cfg), THRESHOLD_COLUMNS, args.out, "thresholds.csv")
    return 0


def cmd_pipeline(args) -> int:
    cfg = _config(args)
    res = run_pipeline(cfg, threads=args.threads, noise=not args.no_noise)
    out = Path(cfg.output_dir)
    for t, img in res.frames:
        fileio.write_pgm(out / fileio.frame_filename(t), img)
    fileio.write_csv(out / "frames.csv", [r.as_row() for r in res.records], FRAME_COLUMNS)
    summary = res.summary_row()
    fileio.write_csv(out / "summary.csv", [summary], SUMMARY_COLUMNS)
    for msg in res.messages:
        log.warning("%s", msg)
    print(f"frames written to {out}")
    print(f"bounce fraction      {res.bounce_fraction:.4f}")
    print(f"measured recoils     {summary['recoils']:.3f} +- {summary['recoils_err']:.3f}")
    print(f"predicted (budget)   {summary['truth_n_corrected']:.3f}")
    print(f"ensemble mean        {summary['truth_ensemble']:.3f}")
    if res.no_signal:
        print("no signal: too few bouncing atoms for a trajectory fit")
        return 2
    return 0


def cmd_verify(args) -> int:
    from .verify import format_report, run_checks

    rows = run_checks(args.rows, threads=args.threads)
    print(format_report(rows))
    if args.out:
        fileio.write_csv(Path(args.out) / "verify.csv",
                         [{"id": r.id, "name": r.name, "computed": r.computed,
                           "reference": r.reference, "tolerance": r.tolerance,
                           "passed": r.passed, "detail": r.detail} for r in rows])
    return 0 if all(r.passed for r in rows) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ewmirror",
                                     description="Radiation pressure on atoms bouncing off an evanescent-wave mirror.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=False):
        p.add_argument("--config", help="experiment JSON (default: built-in settings)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, default=1)
        if seed:
            p.add_argument("--seed", type=int)

    p = sub.add_parser("predict", help="photon budget for one configuration")
    common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sweep", help="photon budget over a detuning or angle grid")
    common(p)
    p.add_argument("--axis", choices=("detuning", "angle"), required=True,
                   help="detuning in Gamma, angle in mrad above critical")
    p.add_argument("--from", dest="start", type=float)
    p.add_argument("--to", dest="stop", type=float)
    p.add_argument("--points", type=int, default=20)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("thresholds", help="bounce thresholds and C3 sensitivity")
    common(p)
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("pipeline", help="simulate, image and analyse a bouncing cloud")
    common(p, seed=True)
    p.add_argument("--no-noise", action="store_true", help="disable shot noise")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("verify", help="run the acceptance checks")
    common(p)
    p.add_argument("--rows", help="comma-separated check ids or groups (e.g. thresholds,5)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except EwMirrorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
