"""Command line entry point: ``harmsync <command> ...``.

Exit codes: 0 success, 1 invalid config or parameters, 2 integration
failure, 64 bad usage.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .averaging import QuadratureSpec, RadialProfile
from .coupling import CouplingError, CouplingFunction
from .dynamics import IntegrationError
from .harness import (ConfigError, averaging_scaling_study, dumps, load_scenario,
                      omega_sweep, run_scenario)
from .topology import build_graph, is_connected

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="harmsync", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a scenario and write CSV/JSON outputs")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides the config)")

    p = sub.add_parser("sweep", help="omega sweep of the original system")
    p.add_argument("config")
    p.add_argument("--Delta", type=float, required=True, help="max initial spread")
    p.add_argument("--delta", type=float, required=True, help="target residual")
    p.add_argument("--omegas", type=_floats, required=True, help="increasing list, e.g. 1,2,5")
    p.add_argument("--eps", type=_floats, default=None, help="settle thresholds (>= delta)")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--out", help="write the report JSON here instead of stdout")

    p = sub.add_parser("profile", help="tabulate the radial profile of one coupling")
    p.add_argument("--kind", required=True, choices=["zero", "linear", "cubic", "saturation", "deadzone"])
    p.add_argument("--gain", type=float, default=1.0)
    p.add_argument("--level", type=float, default=1.0)
    p.add_argument("--width", type=float, default=0.0)
    p.add_argument("--slope", type=float, default=0.1)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--rmax", type=float, required=True)
    p.add_argument("--n", type=int, required=True, help="number of intervals on [0, rmax]")
    p.add_argument("--rule", default="gauss-legendre", choices=["gauss-legendre", "simpson"])
    p.add_argument("--nodes", type=int, default=2048)
    p.add_argument("--out")

    p = sub.add_parser("check-graph", help="connectivity report of a scenario's network")
    p.add_argument("config")

    p = sub.add_parser("avg-error", help="averaging error versus omega")
    p.add_argument("config")
    p.add_argument("--omegas", type=_floats, required=True)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--out", help="write the table CSV here instead of stdout")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _coupling_from_args(a) -> CouplingFunction:
    params = {"zero": {}, "linear": {"gain": a.gain}, "cubic": {"gain": a.gain},
              "saturation": {"gain": a.gain, "level": a.level},
              "deadzone": {"gain": a.gain, "width": a.width, "slope": a.slope}}[a.kind]
    return CouplingFunction.from_dict({"kind": a.kind, **params})


def _profile(a) -> str:
    if a.n < 1 or not a.rmax > 0:
        raise CouplingError("--n must be >= 1 and --rmax positive")
    if not a.amplitude > 0:
        raise CouplingError("--amplitude must be positive")
    profile = RadialProfile(_coupling_from_args(a), QuadratureSpec(a.rule, a.nodes), a.amplitude)
    r, values = profile.table(a.rmax, a.n)
    lines = ["r,rho"] + [f"{x:.17g},{y:.17g}" for x, y in zip(r, values)]
    return "\n".join(lines) + "\n"


def _avg_error_csv(study: dict) -> str:
    lines = ["omega,error"] + [f"{row['omega']:.17g},{row['error']:.17g}" for row in study["rows"]]
    slope = study["slope"]
    lines.append(f"# slope,{'nan' if slope is None else format(slope, '.17g')}")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:          # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    try:
        if args.command == "simulate":
            result = run_scenario(load_scenario(args.config), out_dir=args.out)
            summary = {"files": result.files, "frames": {
                f: {k: m[k] for k in ("final_dist_to_manifold", "sup_max_pairwise", "settle_time")}
                for f, m in result.metrics["frames"].items()},
                "connectivity": result.metrics["connectivity"]}
            sys.stdout.write(dumps(summary))
        elif args.command == "sweep":
            report = omega_sweep(load_scenario(args.config), args.Delta, args.delta, args.omegas,
                                 eps_grid=args.eps, n_seeds=args.seeds, horizon=args.horizon)
            _emit(dumps(report.to_dict()), args.out)
        elif args.command == "profile":
            _emit(_profile(args), args.out)
        elif args.command == "check-graph":
            s = load_scenario(args.config)
            sys.stdout.write(dumps(is_connected(build_graph(s.net)).to_dict()))
        elif args.command == "avg-error":
            study = averaging_scaling_study(load_scenario(args.config), args.omegas, args.horizon)
            _emit(_avg_error_csv(study), args.out)
    except (ConfigError, CouplingError, ValueError) as exc:
        print(f"harmsync: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (IntegrationError, FloatingPointError, OverflowError) as exc:
        print(f"harmsync: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
