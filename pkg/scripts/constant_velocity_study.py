#!/usr/bin/env python3
"""Constant-velocity target study: certify the design, simulate the observer,
and compare it against the information-filter baseline on one measurement
stream. Writes plot-ready CSV files."""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from contrack.cli import cmd_certify, cmd_compare, cmd_run

SCENARIO = os.path.join(
    os.path.dirname(__file__), os.pardir, "scenarios", "m2_constant_velocity.cfg"
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="results", help="output directory")
    parser.add_argument("--config", default=SCENARIO)
    args = parser.parse_args()
    os.makedirs(args.outdir, exist_ok=True)

    print("== certification ==")
    code = cmd_certify(args.config)
    if code != 0:
        return code

    print("\n== observer run ==")
    code = cmd_run(args.config, os.path.join(args.outdir, "constant_velocity.csv"))
    if code != 0:
        return code

    print("\n== baseline comparison ==")
    return cmd_compare(
        args.config, os.path.join(args.outdir, "constant_velocity_compare.csv")
    )


if __name__ == "__main__":
    raise SystemExit(main())
