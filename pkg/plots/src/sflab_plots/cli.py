"""Command line entry: flow | convergence figure generation."""

from __future__ import annotations

import argparse
import sys

from . import figures, io


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sflab-plots",
        description="Render figures from sflab output files",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_flow = sub.add_parser("flow", help="eigenvalue flow diagram")
    p_flow.add_argument("--spectrum", required=True)
    p_flow.add_argument("--flow", required=True)
    p_flow.add_argument("--out", required=True)

    p_conv = sub.add_parser("convergence", help="convergence rate plot")
    p_conv.add_argument("--csv", required=True)
    p_conv.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "flow":
            table = io.load_spectrum(args.spectrum)
            flow = io.load_flow(args.flow)
            summary = figures.plot_flow_diagram(table, flow, args.out)
            print(f"crossings: {summary['n_crossings']} "
                  f"(L {summary['sum_L']:+d}, L' {summary['sum_Lprime']:+d}, "
                  f"total {summary['sum_total']:+d})")
            if not summary["matches"]:
                print(
                    "annotation sums disagree with the flow file: "
                    f"L {summary['sum_L']} vs {flow['sf_L']}, "
                    f"L' {summary['sum_Lprime']} vs {flow['sf_Lprime']}",
                    file=sys.stderr,
                )
                return 1
            return 0
        rows = io.load_convergence(args.csv)
        slope = figures.plot_convergence(rows, args.out)
        print(f"fitted slope: {slope:.6f}")
        return 0
    except io.InputError as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
