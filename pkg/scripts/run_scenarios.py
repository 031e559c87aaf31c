#!/usr/bin/env python3
"""Run every bundled scenario and print a one-line verdict summary.

Usage: python3 scripts/run_scenarios.py [--samples N] [--seed N]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from residue_lab.harness import run_scenario  # noqa: E402

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--samples", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    failures = 0
    for path in sorted(SCENARIOS.glob("*.json")):
        report = run_scenario(str(path), seed=args.seed, samples=args.samples)
        verdicts = ", ".join(f"{t.kind}={t.verdict}" for t in report.tasks)
        status = "ok " if report.all_ok() else "FAIL"
        print(f"[{status}] {path.name:32s} {verdicts}")
        failures += 0 if report.all_ok() else 1
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
