import argparse
import sys

from .figures import FIGURE_KINDS, render
from .io import PlotDataError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="landau-plots", description="render figures from landaulab artifacts"
    )
    parser.add_argument("kind", choices=FIGURE_KINDS, help="figure kind")
    parser.add_argument("--in", dest="table", required=True, metavar="CSV",
                        help="input artifact table")
    parser.add_argument("--fit", default=None, metavar="JSON",
                        help="auxiliary fit/scan JSON (branches, spectrum)")
    parser.add_argument("--out", required=True, metavar="PNG",
                        help="output image path")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        render(args.kind, args.table, args.out, fit_path=args.fit)
    except PlotDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
