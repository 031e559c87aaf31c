#!/usr/bin/env python3
"""Rescaling-family experiment: the global estimate across a decade of t.

The estimate of the prefactored global integral must be statistically zero
for every t; this sweep prints value, standard error and the z-score so the
independence is visible at a glance.

Usage: python3 scripts/t_sweep.py [--samples N] [--scenario p1|p2]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from residue_lab.localize import virtual_residue_sweep  # noqa: E402
from residue_lab.polycore import parse_poly  # noqa: E402
from residue_lab.projgeom import (  # noqa: E402
    BundleSpec,
    GeometryContext,
    MetricSpec,
    PsiSpec,
    SectionSpec,
)


def build(name: str) -> GeometryContext:
    if name == "p1":
        return GeometryContext(
            BundleSpec(1, (2,)),
            SectionSpec((parse_poly("z1^2 - z0^2", 2),)),
            MetricSpec(),
            PsiSpec(parse_poly("1", 2)),
        )
    return GeometryContext(
        BundleSpec(2, (2, 2)),
        SectionSpec((parse_poly("z1^2 - z0^2", 3), parse_poly("z2^2 - z0^2", 3))),
        MetricSpec(),
        PsiSpec(parse_poly("z0", 3)),
    )


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--samples", type=int, default=100000)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--scenario", choices=("p1", "p2"), default="p1")
    args = parser.parse_args()

    ctx = build(args.scenario)
    ts = [0.2, 0.5, 1.0, 2.0, 5.0]
    print(f"scenario {args.scenario}, {args.samples} samples, seed {args.seed}")
    print(f"{'t':>6} {'Re value':>13} {'Im value':>13} {'sigma':>11} {'|z|':>6}")
    for est in virtual_residue_sweep(ctx, ts, args.samples, args.seed):
        z = abs(est.value) / est.std_error
        print(
            f"{est.t:6.2f} {est.value.real:13.3e} {est.value.imag:13.3e} "
            f"{est.std_error:11.3e} {z:6.2f}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
