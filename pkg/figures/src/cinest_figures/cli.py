"""Command-line renderer: one invocation per figure.

    cinest-figures --kind sweep --csv out/sweep.csv --out fig1.svg
    cinest-figures --kind convergence --csv out/trajectory.csv --out mse.svg
    cinest-figures --kind scaled-moment --csv out/ensemble.csv --out m2.svg

Exit codes: 0 success, 2 schema error, 3 nothing to plot.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import (KINDS, FigureSpec, RenderError, SchemaError,
                     render_convergence, render_sweep)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cinest-figures",
        description="Render cinest CSV outputs as vector figures")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--csv", required=True, type=Path,
                        help="input CSV (sweep, trajectory, or ensemble)")
    parser.add_argument("--out", type=Path, default=Path("figure.svg"),
                        help="output image path (vector format by suffix)")
    parser.add_argument("--xscale", choices=("linear", "log"), default=None)
    parser.add_argument("--yscale", choices=("linear", "log"), default=None)
    parser.add_argument("--no-annotate", action="store_true",
                        help="skip the argmin annotation on sweep figures")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    spec = FigureSpec(csv=args.csv, kind=args.kind, out=args.out,
                      xscale=args.xscale, yscale=args.yscale,
                      annotate=not args.no_annotate)
    try:
        if args.kind == "sweep":
            out = render_sweep(spec)
        else:
            out = render_convergence(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 3
    print(out)
    return 0


def console_main():
    sys.exit(main())
