"""Command-line interface.

Subcommands: run, sweep-nu, verify-inequalities, track-vacuum, perturb,
check-conditions.  Exit codes: 0 success, 2 assertion failure (a checked
property does not hold), 1 error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .harness import (
    RunConfig,
    check_conditions,
    load_config,
    perturb_experiment,
    run,
    sweep_nu,
    track_vacuum,
)
from .ineq import load_constants, run_suite

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ASSERTION = 2


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cnslab", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="TOML config file")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--seed", type=int, help="RNG seed override")
        sp.add_argument("--quiet", action="store_true")

    sp = sub.add_parser("run", help="single simulation with diagnostics")
    common(sp)

    sp = sub.add_parser("sweep-nu", help="viscosity sweep with rate fits")
    common(sp)
    sp.add_argument("--nu", type=str, help="comma-separated viscosity list")

    sp = sub.add_parser("verify-inequalities", help="randomized inequality suite")
    common(sp)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--constants", type=Path, help="calibrated constants JSON")

    sp = sub.add_parser("track-vacuum", help="vacuum-set transport report")
    common(sp)
    sp.add_argument("--eps-rel", type=float, default=1e-3)

    sp = sub.add_parser("perturb", help="perturbation stability experiment")
    common(sp)
    sp.add_argument("--etas", type=str, default="1e-2,1e-3,1e-4")

    sp = sub.add_parser("check-conditions", help="viscosity-condition table")
    common(sp)
    return p


def _config_from(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "out", None):
        cfg = replace(cfg, out=str(args.out))
    return cfg


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except AssertionError as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return EXIT_ASSERTION
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _dispatch(args) -> int:
    out = Path(args.out) if getattr(args, "out", None) else None

    if args.command == "run":
        cfg = _config_from(args)
        result = run(cfg, out_dir=out or (Path(cfg.out) if cfg.out else None))
        _say(args, f"run complete: {len(result.records)} records, t = {result.times[-1]:g}")
        if (result.equiv_margins < -1e-10).any():
            raise AssertionError("energy-domination margin went negative")
        if (result.elliptic_gaps > 1e-9).any():
            raise AssertionError("elliptic identity gap exceeded 1e-9")
        return EXIT_OK

    if args.command == "sweep-nu":
        cfg = _config_from(args)
        nus = [float(x) for x in args.nu.split(",")] if args.nu else [1e2, 1e3, 1e4]
        res = sweep_nu(cfg, nus, out_dir=out)
        _say(args, f"slope of div L2L2 vs nu: {res['slope_div_L2L2']:.4f}")
        if res["slope_div_L2L2"] > -0.5 + 0.15:
            raise AssertionError(
                f"divergence decay slope {res['slope_div_L2L2']:.4f} above -0.35"
            )
        return EXIT_OK

    if args.command == "verify-inequalities":
        constants = load_constants(args.constants) if args.constants else None
        seed = args.seed if args.seed is not None else 7
        report = run_suite(n_samples=args.samples, seed=seed, constants=constants)
        text = json.dumps(report, indent=2)
        if out:
            out.mkdir(parents=True, exist_ok=True)
            (out / "inequalities.json").write_text(text)
        _say(args, text)
        if not report["passed"]:
            raise AssertionError("inequality suite found violations")
        return EXIT_OK

    if args.command == "track-vacuum":
        cfg = _config_from(args)
        report = track_vacuum(cfg, eps_rel=args.eps_rel, out_dir=out)
        if report.get("empty"):
            _say(args, "initial data has no near-vacuum region; nothing to track")
            return EXIT_OK
        _say(args, f"relative symmetric difference: {report['sym_diff_relative']:.4f}")
        alpha = report["alpha_t"]
        if not all(0 < a <= 1 for a in alpha) or any(
            b > a + 1e-12 for a, b in zip(alpha, alpha[1:])
        ):
            raise AssertionError("interface exponent series is not in (0,1] nonincreasing")
        return EXIT_OK

    if args.command == "perturb":
        cfg = _config_from(args)
        etas = [float(x) for x in args.etas.split(",")]
        res = perturb_experiment(cfg, etas, out_dir=out)
        _say(args, f"terminal response slope vs eta: {res['slope_dv_vs_eta']:.4f}")
        if not 0.8 <= res["slope_dv_vs_eta"] <= 1.2:
            raise AssertionError(
                f"perturbation response slope {res['slope_dv_vs_eta']:.4f} outside [0.8, 1.2]"
            )
        return EXIT_OK

    if args.command == "check-conditions":
        cfg = _config_from(args)
        table = check_conditions(cfg)
        text = json.dumps(table, indent=2)
        if out:
            out.mkdir(parents=True, exist_ok=True)
            (out / "conditions.json").write_text(text)
        _say(args, text)
        return EXIT_OK

    raise ValueError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
