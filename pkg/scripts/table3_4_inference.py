"""Example 1 with c = 10: intercept bias, ASE and ESE, and the mean p-value
for equal intercepts, for MCP, SCAD and the oracle at each alpha."""

from _study import parser, run_grid, study, write_rows
from pairfuse.simulate import MethodSpec

METHODS = [MethodSpec("MCP", c=10), MethodSpec("SCAD", c=10), MethodSpec("oracle")]
KEEP = ("alpha", "method", "reps", "failures", "alpha1_bias", "alpha2_bias", "alpha1_ase",
        "alpha2_ase", "alpha1_ese", "alpha2_ese", "p_diff_mean")


def main():
    ap = parser(__doc__)
    ap.add_argument("--alphas", type=float, nargs="+", default=[1.0, 1.5, 2.0])
    args = ap.parse_args()
    grid = [({"alpha": a}, study("1", args, METHODS, alpha=a)) for a in args.alphas]
    rows = [{k: r[k] for k in KEEP} for r in run_grid(grid, args.jobs)]
    write_rows(args.out, rows, vars(args))


if __name__ == "__main__":
    main()
