"""Command line entry point: ``fhbeam run|validate|oracle``."""

from __future__ import annotations

import argparse
import logging
import sys

from fhbeam.bench.config import SCENARIOS, ConfigError, parse_config, serialize, with_overrides

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ORACLE = 0, 1, 2, 3


def _seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fhbeam", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV traces")
    run.add_argument("config")
    run.add_argument("--out", default="results", help="output directory (default: results)")
    run.add_argument("--seeds", type=_seeds, help="override seeds, e.g. 1,2,3")
    run.add_argument("--scenario", choices=SCENARIOS, help="override the scenario")

    val = sub.add_parser("validate", help="parse a config and print it with defaults filled in")
    val.add_argument("config")

    sub.add_parser("oracle", help="run brute-force and dense-algebra self-checks")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "oracle":
        from fhbeam.bench.oracle import run_all

        failed = 0
        for name, ok, detail in run_all():
            failed += not ok
            print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
        return EXIT_ORACLE if failed else EXIT_OK

    try:
        spec = parse_config(args.config)
        if args.command == "run":
            spec = with_overrides(spec, seeds=args.seeds, scenario=args.scenario)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        sys.stdout.write(serialize(spec))
        return EXIT_OK

    from fhbeam.bench.runner import run_experiment

    result = run_experiment(spec, args.out)
    print(f"wrote {len(result.traces)} traces and {result.summary_path}")
    if result.failures:
        print(f"{result.failures} solver run(s) failed; see {result.summary_path}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
