"""The ``plots`` console script: render figures from a results CSV."""

from __future__ import annotations

import argparse
import sys

from .errors import EXIT_INVALID_INPUT, EXIT_OK, InvalidInput
from .render import FigureKind, PlotSpec, render

_KIND_BY_NAME = {kind.value: kind for kind in FigureKind}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots",
        description="Publication-style figures from harness results CSVs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="render one figure from a results CSV")
    p_render.add_argument("--in", dest="input", required=True, help="results CSV path")
    p_render.add_argument(
        "--kind", required=True, choices=sorted(_KIND_BY_NAME), help="figure kind"
    )
    p_render.add_argument("--out", required=True, help="output image path")
    p_render.add_argument("--title", default=None)
    p_render.add_argument("--xlabel", default=None)
    p_render.add_argument("--ylabel", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(
        input_csv=args.input,
        kind=_KIND_BY_NAME[args.kind],
        output_path=args.out,
        title=args.title,
        xlabel=args.xlabel,
        ylabel=args.ylabel,
    )
    try:
        result = render(spec)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    for key in sorted(result.annotations):
        print(f"{key} = {result.annotations[key]!r}")
    print(f"wrote {result.path}")
    return EXIT_OK


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
