"""Example 1 solution paths (alpha = 1) on a fixed lambda grid.

Writes one TSV per penalty (lambda, k_hat, bic, converged, mu_1..mu_n),
ready for plotting mu against lambda.
"""

import argparse
import os

import numpy as np

from pairfuse import pathsel
from pairfuse.core import PenaltySpec
from pairfuse.simulate import StudySpec, gen_example

PENALTIES = {"mcp": PenaltySpec("MCP"), "scad": PenaltySpec("SCAD"),
             "l1": PenaltySpec("L1"), "wl1_phi1": PenaltySpec("WeightedL1", phi=1.0)}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=2016)
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--lambda-max", type=float, default=1.2)
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--outdir", default=".")
    args = ap.parse_args()
    ds = gen_example(StudySpec("1", alpha=args.alpha, seed=args.seed), 0)
    grid = np.round(np.arange(args.step, args.lambda_max + args.step / 2, args.step), 10)
    os.makedirs(args.outdir, exist_ok=True)
    for name, spec in PENALTIES.items():
        path = pathsel.solution_path(ds, spec, grid=grid)
        with open(os.path.join(args.outdir, f"path_{name}.tsv"), "w") as fh:
            pathsel.path_to_tsv(path, fh, header_config={"penalty": spec.to_dict(), **vars(args)})


if __name__ == "__main__":
    main()
