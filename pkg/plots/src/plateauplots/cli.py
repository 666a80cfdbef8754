"""One invocation per figure: pick a kind, point at CSVs, get an image."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, MissingColumnError, PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plateau-plots",
        description="Render experiment figures from plateaulab CSV files.",
    )
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    parser.add_argument(
        "--input", required=True, action="append",
        help="input CSV; repeat for multi-file figures (layers, overlays)",
    )
    parser.add_argument("--output", required=True, help="output image path (.png)")
    parser.add_argument("--log-y", action="store_true")
    parser.add_argument("--title")
    parser.add_argument(
        "--threshold", type=float, action="append",
        help="cost threshold for the layers inset; repeatable",
    )
    return parser


def run(argv) -> int:
    try:
        ns = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    spec = PlotSpec(
        kind=ns.kind,
        inputs=tuple(ns.input),
        output=ns.output,
        log_y=ns.log_y,
        title=ns.title,
        thresholds=tuple(ns.threshold) if ns.threshold else (0.05, 0.02),
    )
    try:
        path = render(spec)
    except (MissingColumnError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))
