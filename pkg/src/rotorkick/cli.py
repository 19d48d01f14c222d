"""Command-line entry point: ``rotorkick scan-error | scan-tau1 | trace``."""

import argparse
import json
import sys

from rotorkick.experiments import PRESETS, ConfigError, RunConfig, run
from rotorkick.propagators import ConvergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3

COLUMNS_HELP = """\
output columns
  scan-error  <epsilon|e0r>, then for each propagator P in magnus, secular,
              improved, sudden_impact: delta_P, log10_delta_P; then jmax,
              ref_dt (accepted reference step) and status (ok or
              ref_not_converged).
  scan-tau1   tau1, delta_improved, log10_delta_improved.
  trace       tau, one column per requested propagator (reference, magnus,
              secular, improved, sudden_impact) and first_order; thermal runs
              (T > 0) add first_order_literal. Values are <cos theta>, or the
              thermal average when T > 0.

Lines starting with '#' carry run metadata as JSON, including the full
config echo under 'config'.

presets: {presets}
""".format(presets=", ".join(sorted(PRESETS)))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rotorkick",
        description="First-order propagators for a laser-kicked rigid rotor.",
        epilog=COLUMNS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("scan-error", "scan-tau1", "trace"):
        p = sub.add_parser(name, epilog=COLUMNS_HELP,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--config", help="JSON run config file")
        p.add_argument("--epsilon", type=float)
        p.add_argument("--e0r", type=float)
        p.add_argument("--f", type=float)
        p.add_argument("--T", type=float, help="rotational temperature [K]")
        p.add_argument("--propagators", help="comma list from ref,M,S,I,SI")
        p.add_argument("--tau1", type=float)
        p.add_argument("--tau2", type=float)
        p.add_argument("--tau-h", dest="tau_h", type=float)
        p.add_argument("--jmax", help="basis truncation, integer or 'auto'")
        p.add_argument("--dt", type=float, help="initial reference time step")
        p.add_argument("--grid", nargs=3, type=float, metavar=("START", "STOP", "NUM"),
                       help="uniform scan grid")
        p.add_argument("--scan-variable", help="epsilon or e0r for scan-error")
        p.add_argument("--jobs", type=int)
        p.add_argument("--out", help="output prefix; writes <prefix>.csv (default: stdout)")
    return parser


def config_from_args(args):
    if args.preset and args.config:
        raise ConfigError("use either --preset or --config")
    if args.preset:
        base = dict(PRESETS[args.preset])
        if base["command"] != args.command:
            raise ConfigError(f"preset {args.preset} belongs to '{base['command']}'")
    elif args.config:
        with open(args.config) as fh:
            base = json.load(fh)
        base.setdefault("command", args.command)
        if base["command"] != args.command:
            raise ConfigError(f"config file is for '{base['command']}'")
    else:
        base = {"command": args.command}
    base = json.loads(json.dumps(base))  # deep copy

    for key in ("epsilon", "e0r", "f", "T", "tau1", "tau2", "tau_h", "dt", "jobs"):
        val = getattr(args, key)
        if val is not None:
            base[key] = val
    if args.propagators:
        base["propagators"] = [s.strip() for s in args.propagators.split(",") if s.strip()]
    if args.jmax is not None:
        base["jmax"] = args.jmax if args.jmax == "auto" else int(args.jmax)
    if args.out is not None:
        base["output"] = args.out
    scan = dict(base.get("scan") or {})
    if args.scan_variable:
        scan["variable"] = args.scan_variable
    if args.grid:
        start, stop, num = args.grid
        scan.update(start=start, stop=stop, num=int(num))
        scan.pop("values", None)
    if "variable" not in scan:
        scan["variable"] = {"scan-error": "epsilon", "scan-tau1": "tau1", "trace": "tau"}[args.command]
    base["scan"] = scan
    return RunConfig.from_dict(base)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        table = run(cfg)
    except (ConfigError, ValueError, OSError) as e:
        print(f"rotorkick: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as e:
        print(f"rotorkick: convergence failure: {e}", file=sys.stderr)
        return EXIT_CONVERGENCE

    if cfg.output:
        table.to_csv(f"{cfg.output}.csv")
    else:
        sys.stdout.write(table.to_csv())
    if "status" in table.columns and any(
            r[table.columns.index("status")] != "ok" for r in table.rows):
        return EXIT_CONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
