"""Command-line entry point.

Subcommands
-----------
run <config>      run a YAML scenario and write its output bundle
bressan           exact slice-and-dice evolution with a decay table
checker           write a checkerboard field file
report <bundle>   re-render plots and tables of a stored bundle

Exit codes: 0 pass, 1 configuration error, 2 numerical invariant failure,
3 compliance failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .scenario import EXIT_COMPLIANCE, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK

log = logging.getLogger("mixlab")


def _cmd_run(args) -> int:
    from .config import ConfigError, load_config, parse_overrides
    from .scenario import NumericalInvariantError, run_scenario
    from .transport import TransportError

    try:
        cfg = load_config(args.config, parse_overrides(args.set))
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    out = Path(args.output) if args.output else Path(cfg["outputs"]["directory"])
    if not out.is_absolute() and not args.output:
        out = cfg.base_dir / out
    try:
        result = run_scenario(cfg, out)
    except NumericalInvariantError as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL
    except TransportError as exc:
        log.error("numerical invariant 'transport' failed: %s", exc)
        return EXIT_NUMERICAL
    print((out / "summary.txt").read_text(), end="")
    for r in result.reports:
        tag = "info" if r.informational else ("pass" if r.passed else "FAIL")
        print(f"{r.kind}: {tag}")
    for name, block in result.estimates.items():
        if isinstance(block, dict) and "pass" in block:
            print(f"estimate {name}: {'pass' if block['pass'] else 'FAIL'}")
    print(f"bundle written to {out}")
    return result.exit_code


def _cmd_bressan(args) -> int:
    from .bressan import BressanState, ResolutionError, evolve_exact
    from .grid import write_binary

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    state = BressanState.initial(args.level, args.timeline)
    try:
        _, rows, fields = evolve_exact(state, args.steps, args.resolution, keep_fields=True)
    except ResolutionError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except AssertionError as exc:
        log.error("numerical invariant 'bressan_exactness' failed: %s", exc)
        return EXIT_NUMERICAL
    header = [
        "step", "level", "t", "mix_f", "mix_f_grid", "mix_g", "mix_g_bracket",
        "mix_g_saturated", "bv", "sup_norm", "max_avg_r8",
    ]
    with open(out / "decay.csv", "w", newline="") as fh:
        fh.write(f"# mixlab-bressan timeline={args.timeline} resolution={args.resolution}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([
                r.step, r.level, repr(r.time), repr(r.mix_f), repr(r.mix_f_grid), repr(r.mix_g),
                repr(r.mix_g_bracket), "true" if r.mix_g_saturated else "false",
                str(r.bv), str(r.sup_norm), repr(r.max_avg_r8),
            ])
    for r, fld in zip(rows, fields):
        write_binary(out / f"level_{r.level:02d}.bin", fld)
    print(f"{'step':>4} {'t':>10} {'mix_f':>12} {'mix_g':>10} {'BV':>8} {'sup':>6}")
    for r in rows:
        print(f"{r.step:>4} {r.time:>10.6g} {r.mix_f:>12.6g} {r.mix_g:>10.6g} {str(r.bv):>8} {str(r.sup_norm):>6}")
    return EXIT_OK


def _cmd_checker(args) -> int:
    from .bressan import ResolutionError, checkerboard
    from .grid import write_binary, write_csv

    try:
        fld = checkerboard(args.level, args.resolution)
    except (ResolutionError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    path = Path(args.output)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".csv":
        write_csv(path, fld)
    else:
        write_binary(path, fld)
    print(f"wrote level {args.level} checkerboard at N={args.resolution} to {path} (mean {np.mean(fld.samples)!r})")
    return EXIT_OK


def _cmd_report(args) -> int:
    import yaml

    from .scenario import render_bundle

    bundle = Path(args.bundle)
    log_scale = True
    if (bundle / "config.yaml").exists():
        log_scale = bool(yaml.safe_load((bundle / "config.yaml").read_text())["outputs"]["log_scale"])
    if args.linear:
        log_scale = False
    try:
        stored = render_bundle(bundle, svg=not args.no_svg, log_scale=log_scale)
    except (FileNotFoundError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    print((bundle / "summary.txt").read_text(), end="")
    return EXIT_COMPLIANCE if stored.compliance_failures() else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixlab", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario from a YAML config")
    p.add_argument("config", help="path to the scenario YAML file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key, e.g. time.dt=0.01")
    p.add_argument("--output", help="bundle directory (overrides outputs.directory)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("bressan", help="exact slice-and-dice evolution")
    p.add_argument("--steps", type=int, default=4, help="number of refinement steps")
    p.add_argument("--timeline", choices=("dyadic", "unit"), default="unit", help="time parametrisation of the steps")
    p.add_argument("--resolution", type=int, default=256, help="grid size N")
    p.add_argument("--level", type=int, default=0, help="starting checkerboard level")
    p.add_argument("--output", default="bressan_out", help="output directory")
    p.set_defaults(func=_cmd_bressan)

    p = sub.add_parser("checker", help="write a checkerboard field")
    p.add_argument("--level", type=int, default=0, help="checkerboard level k (cells of side 2^-(k+1))")
    p.add_argument("--resolution", type=int, default=64, help="grid size N")
    p.add_argument("--output", default="checker.bin", help="output file (.bin or .csv)")
    p.set_defaults(func=_cmd_checker)

    p = sub.add_parser("report", help="re-render plots and tables of a bundle")
    p.add_argument("bundle", help="bundle directory containing series.csv")
    p.add_argument("--linear", action="store_true", help="linear y axis")
    p.add_argument("--no-svg", action="store_true", help="only write summary.txt")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
