"""Command-line entry point: ``fbgrail <command> [options]``.

Typical run::

    fbgrail defaults > exp.yaml
    fbgrail simulate --config exp.yaml --out runs/r110
    fbgrail reconstruct --out runs/r110
    fbgrail shape --out runs/r110
    fbgrail plan --out runs/r110
    fbgrail scan-sim --out runs/r110
    fbgrail report --runs runs/r30 runs/r110 --out runs/report

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, pipeline
from .config import default_config, load_config
from .errors import ConfigError, FbgRailError

log = logging.getLogger("fbgrail")


def _experiment(args, out: Path):
    """Config for a command that operates on an existing run directory."""
    cfg = pipeline.run_config(out, args.config)
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    return cfg


def _out(args, cfg=None) -> Path:
    if args.out:
        return Path(args.out)
    if cfg is not None:
        return Path(cfg.output_dir)
    raise ConfigError("--out is required")


def cmd_defaults(args) -> int:
    text = default_config().to_yaml()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    out = _out(args, cfg)
    paths = pipeline.simulate(cfg, out, args.jobs)
    print(f"wrote {len(paths)} batch logs to {out / 'logs'}")
    return 0


def cmd_reconstruct(args) -> int:
    out = _out(args)
    cfg = _experiment(args, out)
    logs = [Path(p) for p in args.logs] if args.logs else None
    paths = pipeline.reconstruct(cfg, out, args.jobs, logs)
    print(f"wrote {len(paths)} curvature profiles to {out / 'profiles'}")
    return 0


def cmd_shape(args) -> int:
    out = _out(args)
    path = pipeline.shape(_experiment(args, out), out)
    print(f"wrote {path}")
    return 0


def cmd_plan(args) -> int:
    out = _out(args)
    traj = pipeline.plan(_experiment(args, out), out)
    if args.follow:
        n = pipeline.follow(traj, out / "trajectory_stream.csv", args.rate)
        print(f"streamed {n} poses to {out / 'trajectory_stream.csv'}")
    print(f"wrote {len(traj)} poses to {out / 'trajectory.csv'}")
    return 0


def cmd_scan_sim(args) -> int:
    out = _out(args)
    cfg = _experiment(args, out)
    if args.assume_flat:
        cfg = cfg.model_copy(update={"scan": cfg.scan.model_copy(update={"assume_flat": True})})
    report = pipeline.scan_sim(cfg, out)
    detach = "none" if report.detach_index is None else report.detach_index
    print(f"contact length {report.contact_length:.2f} mm, detach index {detach}")
    return 0


def cmd_fit_modulus(args) -> int:
    e, se = pipeline.fit_modulus(args.curve, args.material, (args.window_lo, args.window_hi), args.degree)
    print(f"E = {e:.6g} MPa ± {se:.3g}")
    return 0


def cmd_report(args) -> int:
    rng = tuple(args.grating_range) if args.grating_range else None
    paths = pipeline.report([Path(r) for r in args.runs], _out(args), rng)
    print(f"wrote {len(paths)} report files to {_out(args)}")
    return 0


def cmd_calibrate(args) -> int:
    from .calibration import CALIBRATION_SEED, calibrate_wavelength_sigma

    seed = CALIBRATION_SEED if args.seed is None else args.seed
    sigma = calibrate_wavelength_sigma(n_trials=args.trials, seed=seed)
    print(f"wavelength_sigma_nm: {sigma:.5f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fbgrail", description="Multicore FBG shape sensing for a soft ultrasound rail.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment YAML (default: <out>/config.yaml)")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", help="run directory")
    common.add_argument("--jobs", type=int, default=1, help="worker threads; output does not depend on it")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("defaults", parents=[common], help="print the default config as YAML")
    p.set_defaults(func=cmd_defaults)

    p = sub.add_parser("simulate", parents=[common], help="simulate reference and measurement wavelength logs")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", parents=[common], help="wavelength logs to curvature profiles")
    p.add_argument("--logs", nargs="+", help="explicit log files (default: <out>/logs/batch_*.csv)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("shape", parents=[common], help="integrate the pooled profile into a planar shape")
    p.set_defaults(func=cmd_shape)

    p = sub.add_parser("plan", parents=[common], help="shape to probe trajectory")
    p.add_argument("--follow", action="store_true", help="also stream poses to trajectory_stream.csv")
    p.add_argument("--rate", type=float, default=100.0, help="streaming rate in Hz")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("scan-sim", parents=[common], help="execute the planned trajectory against the true surface")
    p.add_argument("--assume-flat", action="store_true", help="plan a straight line instead of the sensed shape")
    p.set_defaults(func=cmd_scan_sim)

    p = sub.add_parser("fit-modulus", parents=[common], help="Young's modulus from a stress-strain curve")
    p.add_argument("--curve", help="CSV with strain,stress_mpa (default: shipped synthetic DragonSkin 30 curve)")
    p.add_argument("--material", help="fit a synthetic curve generated for this material instead")
    p.add_argument("--window-lo", type=float, default=0.075)
    p.add_argument("--window-hi", type=float, default=0.15)
    p.add_argument("--degree", type=int, default=1)
    p.set_defaults(func=cmd_fit_modulus)

    p = sub.add_parser("report", parents=[common], help="error tables and accuracy profile over run directories")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--grating-range", nargs=2, type=int, metavar=("FIRST", "LAST"))
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("calibrate", parents=[common], help="re-derive the calibrated wavelength noise")
    p.add_argument("--trials", type=int, default=400)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return ConfigError.exit_code
    try:
        return args.func(args)
    except FbgRailError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, KeyError) as exc:
        # domain invariants raised outside the typed hierarchy are data problems
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
