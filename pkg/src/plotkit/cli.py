"""Command-line figure generation: ``cnsplot <kind> --in <path> --out <path>``."""

from __future__ import annotations

import argparse
import sys

from .plots import PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cnsplot", description="Render figures from simulation artifacts."
    )
    p.add_argument("kind", choices=["timeseries", "rate", "field"])
    p.add_argument("--in", dest="input_path", required=True, help="input artifact path")
    p.add_argument("--out", dest="output_path", required=True, help="output image path")
    p.add_argument(
        "--columns",
        default="E",
        help="comma-separated diagnostics columns (timeseries only)",
    )
    p.add_argument(
        "--mu",
        type=float,
        default=None,
        help="draw the shear-wave energy reference curve for this viscosity",
    )
    p.add_argument("--overlay", default=None, help="boundary polyline CSV (field only)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(
        kind=args.kind,
        input_path=args.input_path,
        output_path=args.output_path,
        columns=[c for c in args.columns.split(",") if c],
        reference_mu=args.mu,
        overlay_path=args.overlay,
    )
    try:
        out = render(spec)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if isinstance(out, dict):
        print(out["annotation"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
