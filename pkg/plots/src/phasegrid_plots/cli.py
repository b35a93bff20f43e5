"""Command line for rendering learning-curve figures."""
from __future__ import annotations

import argparse
import sys

from .render import CurveSelection, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasegrid-plot",
        description="Plot mean steps per episode from an aggregate learning-curve CSV",
    )
    parser.add_argument("--input", required=True, help="aggregate CSV path")
    parser.add_argument("--out", required=True, help="output image path (.png, .svg, .pdf)")
    parser.add_argument("--agent", help="keep only this agent")
    parser.add_argument("--mode", choices=["semi", "markov"], help="keep only this mode")
    parser.add_argument("--scenario", help="keep only this scenario")
    parser.add_argument("--log-y", action="store_true", help="logarithmic step axis")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    selection = CurveSelection(
        input_csv=args.input,
        output=args.out,
        agent=args.agent,
        mode=args.mode,
        scenario=args.scenario,
        log_y=args.log_y,
    )
    try:
        output = render(selection)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
