"""Command-line interface.

Subcommands: fit, path, select, infer, simulate, metrics and project.  Every
artifact embeds the resolved configuration (including the argv that made it),
and files are written atomically through a temporary file in the target
directory.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__, admm, inference, metrics, pathsel, simulate
from .core import (PENALTY_FAMILIES, DimensionMismatch, FusionFit, InvalidShapeParameter,
                   NumericalError, PairFuseError, PenaltySpec, RankDeficientX, SolverConfig,
                   TooFewObservations, canonical_family, make_dataset, make_partition)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4
COMMANDS = ("fit", "path", "select", "infer", "simulate", "metrics", "project")


class DataError(PairFuseError, ValueError):
    pass


class EmptyFile(DataError):
    pass


class MissingColumn(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row, self.column = row, column


# ---------------------------------------------------------------- CSV input

def _read_rows(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    rows = [r for r in rows if r]
    if not rows:
        raise EmptyFile(f"{path}: no header row")
    return rows[0], rows[1:]


def read_csv_dataset(path, response_column: str, exclude: Sequence[str] = ()):
    """Load a numeric CSV into a Dataset.

    X is every column other than the response and ``exclude``, in file order.
    Lines starting with ``#`` are comments.  Any cell that does not parse as
    a finite number is an error: nothing is imputed or dropped.
    """
    header, body = _read_rows(path)
    header = [h.strip() for h in header]
    if response_column not in header:
        raise MissingColumn(f"{path}: response column {response_column!r} not in header {header}")
    missing = [c for c in exclude if c not in header]
    if missing:
        raise MissingColumn(f"{path}: excluded columns {missing} not in header")
    if not body:
        raise EmptyFile(f"{path}: header only, no data rows")
    values = np.empty((len(body), len(header)))
    for r, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}", r)
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                raise ParseError(f"{path}: row {r}, column {header[c]!r}: "
                                 f"{cell!r} is not a finite number", r, header[c])
            values[r - 2, c] = v
    iy = header.index(response_column)
    keep = [k for k, h in enumerate(header) if k != iy and h not in exclude]
    return make_dataset(values[:, iy], values[:, keep], names=[header[k] for k in keep])


def read_column(path, column: str) -> np.ndarray:
    header, body = _read_rows(path)
    header = [h.strip() for h in header]
    if column not in header:
        raise MissingColumn(f"{path}: column {column!r} not in header")
    k = header.index(column)
    return np.array([row[k] for row in body])


# ------------------------------------------------------------------ output

def atomic_write(path: Optional[str], text: str) -> None:
    """Write ``text`` to ``path`` via temp-then-rename; ``None`` or ``-`` means stdout."""
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=True) + "\n"


# ------------------------------------------------------------------ config

@dataclass
class RunConfig:
    command: str
    argv: list
    data: Optional[str] = None
    response: str = "y"
    exclude: list = field(default_factory=list)
    out: Optional[str] = None
    penalty: Optional[dict] = None
    solver: Optional[dict] = None
    num_points: int = 50
    min_ratio: float = 0.01
    bic_c: float = pathsel.DEFAULT_BIC_C
    path_out: Optional[str] = None
    fit: Optional[str] = None
    tests: list = field(default_factory=list)
    heterogeneity: bool = False
    level: float = 0.95
    truth: Optional[str] = None
    study: Optional[dict] = None
    jobs: int = 1
    adjusted_out: Optional[str] = None
    column: Optional[str] = None
    onto: list = field(default_factory=list)
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["version"] = __version__
        return d

    def penalty_spec(self) -> PenaltySpec:
        p = self.penalty
        return PenaltySpec(p["family"], p["lambda"], p["gamma"], p["tau"], p["phi"])

    def solver_config(self) -> SolverConfig:
        s = self.solver
        return SolverConfig(s["vartheta"], s["tol_primal"], s["max_iter"])


def _family(text: str) -> str:
    try:
        return canonical_family(text)
    except (ValueError, PairFuseError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _group_pair(text: str):
    parts = text.replace("g", "").split("=")
    try:
        a, b = (int(x) for x in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected K=K' (e.g. g1=g2), got {text!r}") from None
    if a == b or min(a, b) < 1:
        raise argparse.ArgumentTypeError(f"need two distinct positive group labels, got {text!r}")
    return [a, b]


def _add_data(p, required=True):
    p.add_argument("--data", required=required, help="CSV file with a header row")
    p.add_argument("--response", default="y", help="response column (default: y)")
    p.add_argument("--exclude", nargs="*", default=[], metavar="COL",
                   help="columns to leave out of X")


def _add_penalty(p, need_lambda):
    p.add_argument("--penalty", type=_family, default="MCP",
                   help=f"one of {', '.join(PENALTY_FAMILIES)} (case-insensitive)")
    p.add_argument("--gamma", type=float, default=None, help="MCP/SCAD concavity (3 / 3.7)")
    p.add_argument("--lambda", dest="lam", type=_positive, required=need_lambda,
                   default=None if need_lambda else 1.0)
    p.add_argument("--tau", type=_positive, default=1.0, help="TruncatedL1 threshold")
    p.add_argument("--phi", type=float, default=0.0, help="WeightedL1 kernel bandwidth")
    p.add_argument("--vartheta", type=_positive, default=1.0, help="ADMM penalty parameter")
    p.add_argument("--tol", type=_positive, default=None,
                   help="primal tolerance (default 1e-4 * sqrt(n(n-1)/2))")
    p.add_argument("--max-iter", type=int, default=1000)


def _add_grid(p):
    p.add_argument("--num-points", type=int, default=50)
    p.add_argument("--min-ratio", type=float, default=0.01)
    p.add_argument("--bic-c", type=_positive, default=pathsel.DEFAULT_BIC_C)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pairfuse", description="Subgroup discovery by concave pairwise fusion.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit at a single lambda, write JSON")
    _add_data(p)
    _add_penalty(p, need_lambda=True)
    p.add_argument("--out")

    for name, hlp in (("path", "solution path over lambda, write TSV"),
                      ("select", "path plus BIC selection, write JSON")):
        p = sub.add_parser(name, help=hlp)
        _add_data(p)
        _add_penalty(p, need_lambda=False)
        _add_grid(p)
        p.add_argument("--out")
        if name == "select":
            p.add_argument("--path-out", help="also write the path TSV here")

    p = sub.add_parser("infer", help="inference for the groups of a fit/select JSON")
    p.add_argument("--fit", required=True)
    _add_data(p, required=False)
    p.add_argument("--test", action="append", type=_group_pair, default=[], metavar="gK=gK'")
    p.add_argument("--heterogeneity", action="store_true",
                   help="largest group against the average of the rest")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="seeded simulation study, write CSV")
    p.add_argument("--example", choices=simulate.EXAMPLES, default="1")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--penalty", action="append", default=None,
                   help="family or 'oracle'; repeat for several methods (default MCP)")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--tau", type=_positive, default=1.0)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--lambda", dest="lam", type=_positive, default=None,
                   help="fixed lambda instead of BIC selection")
    p.add_argument("--bic-c", type=_positive, default=pathsel.DEFAULT_BIC_C)
    p.add_argument("--vartheta", type=_positive, default=1.0)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--adjusted-out", help="also write y - X beta_ols per replication")

    p = sub.add_parser("metrics", help="Rand and Davies-Bouldin indices for a fit")
    p.add_argument("--fit", required=True)
    _add_data(p, required=False)
    p.add_argument("--truth", help="column of true labels in the data file")
    p.add_argument("--out")

    p = sub.add_parser("project", help="fitted values of a column regressed on factor indicators")
    p.add_argument("--data", required=True)
    p.add_argument("--column", required=True)
    p.add_argument("--onto", nargs="+", required=True, metavar="COL")
    p.add_argument("--out")
    return ap


def parse_args(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """Parse and validate; usage errors exit with status 2."""
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    ns = ap.parse_args(argv)
    cfg = RunConfig(command=ns.command, argv=argv)
    for key in ("data", "response", "exclude", "out", "num_points", "min_ratio", "bic_c",
                "path_out", "fit", "heterogeneity", "level", "truth", "jobs", "adjusted_out",
                "column", "onto", "seed"):
        if hasattr(ns, key):
            setattr(cfg, key, getattr(ns, key))
    try:
        if ns.command in ("fit", "path", "select"):
            spec = PenaltySpec(ns.penalty, ns.lam, ns.gamma, ns.tau, ns.phi)
            solver = SolverConfig(ns.vartheta, ns.tol, ns.max_iter)
            spec.validate_with(solver)
            cfg.penalty, cfg.solver = spec.to_dict(), solver.to_dict()
            if ns.command != "fit" and (ns.num_points < 2 or not 0 < ns.min_ratio < 1):
                ap.error("--num-points must be >= 2 and --min-ratio in (0, 1)")
        elif ns.command == "infer":
            cfg.tests = ns.test
            if not 0 < ns.level < 1:
                ap.error("--level must lie in (0, 1)")
        elif ns.command == "simulate":
            methods = []
            for fam in ns.penalty or ["MCP"]:
                if fam.lower() == "oracle":
                    methods.append(simulate.MethodSpec("oracle"))
                    continue
                m = simulate.MethodSpec(_family(fam), ns.gamma, ns.tau, ns.phi, ns.bic_c, ns.lam)
                m.penalty().validate_with(SolverConfig(ns.vartheta))
                methods.append(m)
            study = simulate.StudySpec(example=ns.example, n=ns.n, alpha=ns.alpha, reps=ns.reps,
                                       seed=ns.seed, methods=tuple(methods), vartheta=ns.vartheta)
            cfg.study = study.to_dict()
    except argparse.ArgumentTypeError as exc:
        ap.error(str(exc))
    except (InvalidShapeParameter, ValueError) as exc:
        ap.error(str(exc))
    return cfg


# -------------------------------------------------------------------- run

def _dataset(cfg: RunConfig, embedded: Optional[dict] = None):
    data = cfg.data or (embedded or {}).get("data")
    if data is None:
        raise DataError("no data file given and none recorded in the fit")
    response = cfg.response if cfg.data else embedded.get("response", "y")
    exclude = list(cfg.exclude if cfg.data else embedded.get("exclude", []))
    if cfg.truth and cfg.truth not in exclude:
        exclude.append(cfg.truth)
    return read_csv_dataset(data, response, exclude), data


def _load_fit(path):
    with open(path) as fh:
        doc = json.load(fh)
    if "fit" not in doc:
        raise DataError(f"{path}: no 'fit' object (expected output of fit or select)")
    return doc, FusionFit.from_dict(doc["fit"])


def _fit_doc(cfg, fit, part, extra=None):
    doc = {"config": cfg.to_dict(), "fit": fit.to_dict(), "partition": part.to_dict()}
    doc.update(extra or {})
    return doc


def _cmd_fit(cfg):
    ds, _ = _dataset(cfg)
    f = admm.fit(ds, cfg.penalty_spec(), cfg.solver_config())
    part = pathsel.extract_partition(f)
    atomic_write(cfg.out, _dumps(_fit_doc(cfg, f, part)))


def _path(cfg):
    ds, _ = _dataset(cfg)
    spec, solver = cfg.penalty_spec(), cfg.solver_config()
    ws = admm.precompute(ds, solver)
    grid = pathsel.lambda_grid(ds, spec, solver, cfg.num_points, cfg.min_ratio, workspace=ws)
    path = pathsel.solution_path(ds, spec, solver, grid=grid, c=cfg.bic_c, workspace=ws)
    return ds, path


def _tsv(cfg, path):
    buf = io.StringIO()
    pathsel.path_to_tsv(path, buf, header_config=cfg.to_dict())
    return buf.getvalue()


def _cmd_path(cfg):
    _, path = _path(cfg)
    atomic_write(cfg.out, _tsv(cfg, path))


def _cmd_select(cfg):
    ds, path = _path(cfg)
    path = pathsel.select_lambda(path, ds)
    b = path.best
    sel = {"selected_lambda": b.lam, "k_hat": b.k_hat, "bic": b.bic, "c_n": path.c_n,
           "lambdas": path.lambdas.tolist(), "k_hats": path.k_hats.tolist(),
           "bics": [e.bic for e in path.entries]}
    if cfg.path_out:
        atomic_write(cfg.path_out, _tsv(cfg, path))
    atomic_write(cfg.out, _dumps(_fit_doc(cfg, b.fit, b.partition, {"selection": sel})))


def _cmd_infer(cfg):
    doc, f = _load_fit(cfg.fit)
    ds, _ = _dataset(cfg, doc.get("config"))
    if ds.n != f.n:
        raise DimensionMismatch(f"fit has n={f.n} but data has n={ds.n}")
    part = pathsel.extract_partition(f)
    rep = inference.infer(ds, part, f)
    tests = []
    for a, b in cfg.tests:
        z, p = inference.test_group_difference(rep, a, b)
        contrast = np.zeros(rep.k_hat)
        contrast[a - 1], contrast[b - 1] = 1.0, -1.0
        lo, hi = inference.confidence_interval(contrast, rep.alpha_hat, rep.cov_alpha, cfg.level)
        tests.append({"test": f"g{a}=g{b}", "z": z, "p_value": p, "ci": [lo, hi], "level": cfg.level})
    if cfg.heterogeneity:
        z, p = inference.test_heterogeneity(ds, part, f)
        tests.append({"test": f"largest(g{inference.largest_group(part)})=mean(rest)",
                      "z": z, "p_value": p})
    out = rep.to_dict()
    out["tests"] = tests
    out["config"] = cfg.to_dict()
    atomic_write(cfg.out, _dumps(out))


def _cmd_simulate(cfg):
    d = dict(cfg.study)
    d["methods"] = tuple(simulate.MethodSpec(**m) for m in d["methods"])
    spec = simulate.StudySpec(**d)
    summary = simulate.run_study(spec, n_jobs=cfg.jobs)
    buf = io.StringIO()
    simulate.write_summary_csv(summary, buf, header_config=cfg.to_dict())
    if cfg.adjusted_out:
        adj = io.StringIO()
        adj.write("# config: " + json.dumps(cfg.to_dict(), sort_keys=True) + "\n")
        simulate.write_adjusted_responses(spec, adj)
        atomic_write(cfg.adjusted_out, adj.getvalue())
    atomic_write(cfg.out, buf.getvalue())


def _cmd_metrics(cfg):
    doc, f = _load_fit(cfg.fit)
    ds, data = _dataset(cfg, doc.get("config"))
    part = pathsel.extract_partition(f)
    out = {"k_hat": part.k_hat, "config": cfg.to_dict()}
    adj = ds.y - (ds.X @ f.beta if ds.p else 0.0)
    out["davies_bouldin"] = metrics.davies_bouldin(adj, part) if part.k_hat > 1 else None
    if cfg.truth:
        labels = read_column(data, cfg.truth)
        out["rand_index"] = metrics.rand_index(labels, part.assignment)
    atomic_write(cfg.out, _dumps(out))


def project_column(values, factors) -> np.ndarray:
    """Least-squares fitted values of ``values`` on an intercept plus the
    treatment-coded indicators of each factor (first level dropped)."""
    cols = [np.ones(len(values))]
    for f in factors:
        levels = sorted(set(f), key=lambda s: (len(s), s))
        cols += [(np.asarray(f) == lev).astype(float) for lev in levels[1:]]
    D = np.column_stack(cols)
    coef = np.linalg.lstsq(D, values, rcond=None)[0]
    return D @ coef


def _cmd_project(cfg):
    header, body = _read_rows(cfg.data)
    header = [h.strip() for h in header]
    for c in [cfg.column] + list(cfg.onto):
        if c not in header:
            raise MissingColumn(f"{cfg.data}: column {c!r} not in header")
    k = header.index(cfg.column)
    try:
        vals = np.array([float(r[k]) for r in body])
    except ValueError as exc:
        raise ParseError(f"{cfg.data}: column {cfg.column!r}: {exc}", column=cfg.column) from None
    factors = [[r[header.index(c)].strip() for r in body] for c in cfg.onto]
    fitted = project_column(vals, factors)
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(cfg.to_dict(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header + [f"{cfg.column}_projected"])
    for r, v in zip(body, fitted):
        w.writerow(list(r) + [repr(float(v))])
    atomic_write(cfg.out, buf.getvalue())


_HANDLERS = {"fit": _cmd_fit, "path": _cmd_path, "select": _cmd_select, "infer": _cmd_infer,
             "simulate": _cmd_simulate, "metrics": _cmd_metrics, "project": _cmd_project}


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (NumericalError, np.linalg.LinAlgError, pathsel.NoFusionAchievable,
                        pathsel.NoConvergedEntry)):
        return EXIT_NUMERICAL
    if isinstance(exc, (DataError, DimensionMismatch, RankDeficientX, TooFewObservations,
                        OSError, json.JSONDecodeError, KeyError, PairFuseError, ValueError)):
        return EXIT_DATA
    raise exc


def run(cfg: RunConfig) -> int:
    try:
        _HANDLERS[cfg.command](cfg)
    except Exception as exc:  # mapped to an exit status, re-raised if unexpected
        code = exit_code(exc)
        print(f"pairfuse {cfg.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    return run(parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
