"""Example 1: number of groups and estimation error by method, c and alpha.

Writes one row per (c, alpha, method) with the mean/median/se of K-hat and
the mean/se of rmse_mu and rmse_beta.  The oracle rows ignore c.
"""

from _study import parser, run_grid, study, write_rows
from pairfuse.simulate import MethodSpec


def methods(c):
    return [MethodSpec("MCP", c=c), MethodSpec("SCAD", c=c),
            MethodSpec("WeightedL1", phi=1.0, c=c), MethodSpec("WeightedL1", phi=2.0, c=c),
            MethodSpec("oracle")]


def main():
    ap = parser(__doc__)
    ap.add_argument("--alphas", type=float, nargs="+", default=[1.0, 1.5, 2.0])
    ap.add_argument("--cs", type=float, nargs="+", default=[5.0, 10.0])
    args = ap.parse_args()
    grid = [({"c": c, "alpha": a}, study("1", args, methods(c), alpha=a))
            for c in args.cs for a in args.alphas]
    write_rows(args.out, run_grid(grid, args.jobs), vars(args))


if __name__ == "__main__":
    main()
