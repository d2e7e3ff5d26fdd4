"""Command-line front end: run scenarios, validate configs, emit plot data.

Exit codes: 0 all checks passed, 1 at least one numerical check failed,
2 configuration (schema) violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .errors import ConfigError
from .scenarios import BUNDLED_SCENARIOS, load_scenario, run_scenario, validate_scenario

FIXTURE_ENV_VAR = "SYMPDIST_FIXTURES"


def _cmd_run(args) -> int:
    try:
        config = load_scenario(args.config)
    except FileNotFoundError:
        print(f"error: no such config file or bundled scenario: {args.config}",
              file=sys.stderr)
        return 2
    try:
        report = run_scenario(config, threads=args.threads,
                              seed_override=args.seed_override)
    except ConfigError as err:
        print(f"schema violation at {err.pointer}: {err}", file=sys.stderr)
        return 2
    payload = json.dumps(report, indent=2, default=_jsonable)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload)
        print(f"report written to {args.out}")
    else:
        print(payload)
    if not report["passed"]:
        failing = [
            c["name"]
            for step in report["steps"]
            for c in step["checks"]
            if not c["passed"]
        ]
        print(f"FAILED checks: {', '.join(failing)}", file=sys.stderr)
        return 1
    return 0


def _cmd_validate(args) -> int:
    try:
        config = load_scenario(args.config)
    except FileNotFoundError:
        print(f"error: no such config file or bundled scenario: {args.config}",
              file=sys.stderr)
        return 2
    try:
        validate_scenario(config)
    except ConfigError as err:
        print(f"schema violation at {err.pointer}: {err}", file=sys.stderr)
        return 2
    print("configuration valid")
    return 0


def _cmd_plotdata(args) -> int:
    with open(args.report) as fh:
        report = json.load(fh)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for i, step in enumerate(report.get("steps", [])):
        table = step.get("table", [])
        if not table:
            continue
        columns = sorted({key for row in table for key in row})
        path = os.path.join(out_dir, f"step_{i:02d}_{step['kind']}.csv")
        with open(path, "w", newline="") as fh:
            fh.write(f"# scenario: {report['scenario']['name']}\n")
            fh.write(f"# step: {step['kind']}\n")
            fh.write(f"# columns: {', '.join(columns)}\n")
            writer = csv.DictWriter(fh, fieldnames=columns)
            writer.writeheader()
            for row in table:
                writer.writerow({k: _csv_cell(row.get(k)) for k in columns})
        written.append(path)
    for path in written:
        print(path)
    return 0


def _cmd_fixtures(args) -> int:
    if args.action == "list":
        print("bundled scenarios:")
        for name in sorted(BUNDLED_SCENARIOS):
            steps = [s["kind"] for s in BUNDLED_SCENARIOS[name]["steps"]]
            print(f"  {name}: {', '.join(steps) if steps else '(no steps)'}")
        fixture_dir = os.environ.get(FIXTURE_ENV_VAR)
        if fixture_dir and os.path.isdir(fixture_dir):
            print(f"fixture files in {fixture_dir} (${FIXTURE_ENV_VAR}):")
            for name in sorted(os.listdir(fixture_dir)):
                print(f"  {name}")
        elif fixture_dir:
            print(f"${FIXTURE_ENV_VAR} set but {fixture_dir} is not a directory")
        else:
            print(f"(set ${FIXTURE_ENV_VAR} to list fixture files)")
        return 0
    return 2


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _csv_cell(value):
    if isinstance(value, (list, dict)):
        return json.dumps(value)
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sympdist",
        description="Splitting seminorms, flux lattices and distances to the "
                    "Hamiltonian group on flat tori",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario config (file or bundled name)")
    run_p.add_argument("config")
    run_p.add_argument("--out", default=None, help="write the report JSON here")
    run_p.add_argument("--threads", type=int, default=1,
                       help="worker threads for independent steps")
    run_p.add_argument("--seed-override", type=int, default=None,
                       help="replace the scenario seed")
    run_p.set_defaults(func=_cmd_run)

    val_p = sub.add_parser("validate", help="schema-check a scenario config")
    val_p.add_argument("config")
    val_p.set_defaults(func=_cmd_validate)

    plot_p = sub.add_parser("plotdata", help="emit CSV tables from a report")
    plot_p.add_argument("report")
    plot_p.add_argument("--out", default=None, help="output directory")
    plot_p.set_defaults(func=_cmd_plotdata)

    fix_p = sub.add_parser("fixtures", help="fixture utilities")
    fix_p.add_argument("action", choices=["list"])
    fix_p.set_defaults(func=_cmd_fixtures)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
