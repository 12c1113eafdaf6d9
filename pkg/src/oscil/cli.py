"""``oscil`` command line: solve, table, figure, params."""

from __future__ import annotations

import argparse
import logging
import sys

from . import baselines, bench, hbvm, truncation

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3


def read_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment.  Keys use option spelling."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def _omega(text: str):
    return text if text == "auto" else float(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oscil", description="Spectral HBVM benchmarks for oscillatory Hamiltonian problems.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", help="key=value file; command-line flags win")
        return sp

    sp = with_config(sub.add_parser("solve", help="one integration, one CSV row"))
    sp.add_argument("--problem", choices=bench.PROBLEMS)
    sp.add_argument("--method", help="sv | gautschi | deuflhard | gauss-<s> | shbvm")
    sp.add_argument("--steps", type=int)
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--omega", type=_omega, default="auto")
    sp.add_argument("--u", type=float, default=truncation.U_DOUBLE)
    sp.add_argument("--out", help="CSV path, with a PNG next to it (default: print to stdout)")
    sp.add_argument("--no-plot", action="store_true")

    sp = with_config(sub.add_parser("table", help="all rows of an error table"))
    sp.add_argument("--id", choices=sorted(bench.TABLES))
    sp.add_argument("--scale", choices=("desk", "full"), default="desk")
    sp.add_argument("--out-dir", default="results")
    sp.add_argument("--no-plot", action="store_true")

    sp = with_config(sub.add_parser("figure", help="data behind a figure"))
    sp.add_argument("--id", choices=bench.FIGURES)
    sp.add_argument("--out-dir", default="results")
    sp.add_argument("--no-plot", action="store_true")

    sp = with_config(sub.add_parser("params", help="(s0, s, k) for a given omega*h"))
    sp.add_argument("--omega-h", type=float)
    sp.add_argument("--nu", type=float, default=1.0)
    sp.add_argument("--u", type=float, default=truncation.U_DOUBLE)
    return p


_REQUIRED = {"solve": ("problem", "method", "steps"), "table": ("id",), "figure": ("id",), "params": ("omega_h",)}


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            values = read_config(args.config)
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
        # Re-parse with file values as defaults so explicit flags still win.
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, value in values.items():
            if key not in known or key == "config":
                parser.error(f"unknown config key {key!r}")
            action = known[key]
            defaults[key] = action.type(value) if action.type else value
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    for key in _REQUIRED[args.command]:
        if getattr(args, key) is None:
            parser.error(f"{args.command}: --{key.replace('_', '-')} is required")
    return args


def main(argv=None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "solve":
            cfg = bench.RunConfig(args.problem, args.method, args.steps, t_end=args.t_end,
                                  nu=args.nu, omega=args.omega, u=args.u, out_path=args.out)
            rec = bench.run_solve(cfg)
            if args.out and not args.no_plot:
                from . import plotting

                plotting.plot_table(args.out, [rec], title=f"{args.problem} {args.method} N={args.steps}")
            if not args.out:
                print(",".join(bench.CSV_HEADER))
                print(",".join(rec.csv_row()))
        elif args.command == "table":
            for path in bench.run_table(args.id, args.out_dir, args.scale, plot=not args.no_plot).values():
                print(path)
        elif args.command == "figure":
            print(bench.run_figure(args.id, args.out_dir, plot=not args.no_plot))
        else:
            print(bench.params_command(args.omega_h, args.nu, args.u))
    except (bench.UnknownProblem, bench.UnknownTable, bench.UnknownFigure, baselines.UnknownMethod) as exc:
        print(f"oscil: unknown name {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"oscil: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except hbvm.SolverDiverged as exc:
        print(f"oscil: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
