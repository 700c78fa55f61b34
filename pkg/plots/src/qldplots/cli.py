"""Command line: qldlab-plots render --kind KIND --in CSV... --out DIR."""

from __future__ import annotations

import argparse
import sys

from .render import FIGURE_KINDS, FigureSpec, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="qldlab-plots", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)
    sub = subs.add_parser("render")
    sub.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    sub.add_argument("--in", dest="inputs", nargs="+", required=True, metavar="CSV")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--name", help="output basename (default per kind)")
    sub.add_argument("--overlay", help="theory_boundary.csv drawn over a heatmap")
    sub.add_argument("--manifest", help="manifest.json for schema and T-scale checks")
    args = parser.parse_args(argv)

    spec = FigureSpec(
        kind=args.kind,
        inputs=tuple(args.inputs),
        out_dir=args.out,
        name=args.name,
        overlay=args.overlay,
        manifest=args.manifest,
    )
    for path in render(spec):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
