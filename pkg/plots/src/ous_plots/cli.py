"""`ous-plots render --kind <kind> --in <csv> --out <png>`.

Exit codes mirror the harness CLI: 0 success, 2 bad arguments or CSV
contents, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import FIGURE_KINDS, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ous-plots", description="Regenerate figures from sweep/replay CSVs"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("render", help="render one figure from one CSV")
    r.add_argument("--kind", required=True, choices=sorted(FIGURE_KINDS))
    r.add_argument("--in", dest="input", required=True, help="input CSV path")
    r.add_argument("--out", dest="output", required=True, help="output image path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        input_csv=Path(args.input), kind=args.kind, output_image=Path(args.output)
    )
    try:
        omitted = render(spec)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    note = f" ({omitted} sentinel rows omitted)" if omitted else ""
    print(f"wrote {args.output}{note}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
