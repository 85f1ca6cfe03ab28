"""Seeded data-generating processes and the replication driver.

Every replication draws from its own counter-based stream,
``Philox(SeedSequence(seed, spawn_key=(rep,)))``, so replication r is the
same whether it runs alone, in a batch, or in another process.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import admm, inference, metrics, pathsel
from .core import (Dataset, PairFuseError, PenaltySpec, SolverConfig, make_dataset,
                   make_partition)

logger = logging.getLogger(__name__)

EXAMPLES = ("1", "2", "3", "4-case1", "4-case2-design1", "4-case2-design2")

# (intercept values, probabilities) for the discrete-intercept designs
_THREE = np.array([-2.0, 0.0, 2.0])
_DESIGNS = {
    "2": (_THREE, np.array([1, 1, 1]) / 3),
    "4-case1": (_THREE, np.array([1, 1, 1]) / 3),
    "4-case2-design1": (_THREE, np.array([0.2, 0.3, 0.5])),
    "4-case2-design2": (_THREE, np.array([0.1, 0.3, 0.6])),
}


@dataclass(frozen=True)
class MethodSpec:
    """One estimator in a study.

    ``family="oracle"`` refits least squares on the true partition.  With
    ``lam`` set the penalised fit is computed at that single lambda instead
    of along a BIC-selected path.
    """

    family: str = "MCP"
    gamma: Optional[float] = None
    tau: float = 1.0
    phi: float = 0.0
    c: float = 5.0
    lam: Optional[float] = None
    name: Optional[str] = None

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.family.lower() == "oracle":
            return "ORACLE"
        spec = PenaltySpec(self.family, 1.0, self.gamma, self.tau, self.phi)
        extra = {"TruncatedL1": f"tau={self.tau:g}", "WeightedL1": f"phi={self.phi:g}"}.get(spec.family, "")
        sel = f"lambda={self.lam:g}" if self.lam is not None else f"c={self.c:g}"
        return f"{spec.family}({', '.join(s for s in (extra, sel) if s)})"

    def penalty(self, lam: float = 1.0) -> PenaltySpec:
        return PenaltySpec(self.family, lam, self.gamma, self.tau, self.phi)


@dataclass(frozen=True)
class StudySpec:
    example: str = "1"
    n: int = 100
    alpha: float = 1.0
    rho: float = 0.3
    sigma: float = 0.5
    p: int = 5
    reps: int = 100
    seed: int = 0
    methods: tuple = (MethodSpec(),)
    vartheta: float = 1.0
    tol_primal: Optional[float] = None
    max_iter: int = 1000
    homogeneous_mu: float = 2.0

    def __post_init__(self):
        if self.example not in EXAMPLES:
            raise ValueError(f"example must be one of {EXAMPLES}, got {self.example!r}")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        object.__setattr__(self, "methods", tuple(self.methods))

    def solver(self) -> SolverConfig:
        return SolverConfig(self.vartheta, self.tol_primal, self.max_iter)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = [asdict(m) for m in self.methods]
        return d


def rep_rng(seed: int, rep_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(rep_index,))))


def gen_covariates(n: int, p: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Rows with unit variances and common pairwise correlation ``rho``."""
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    w = rng.standard_normal(n)
    z = rng.standard_normal((n, p))
    return math.sqrt(rho) * w[:, None] + math.sqrt(1 - rho) * z


def gen_example(spec: StudySpec, rep_index: int) -> Dataset:
    """Draw replication ``rep_index`` of ``spec.example`` with its ground truth.

    Truth labels number the distinct intercept values in increasing order.
    """
    rng = rep_rng(spec.seed, rep_index)
    n = spec.n
    X = gen_covariates(n, spec.p, spec.rho, rng)
    beta = rng.uniform(0.5, 1.0, spec.p)
    if spec.example == "1":
        labels = np.where(rng.random(n) < 0.5, 1, 2)
        mu = np.where(labels == 1, -spec.alpha, spec.alpha)
    elif spec.example == "3":
        labels = np.ones(n, dtype=int)
        mu = np.full(n, float(spec.homogeneous_mu))
    else:
        values, probs = _DESIGNS[spec.example]
        labels = rng.choice(len(values), size=n, p=probs) + 1
        mu = values[labels - 1]
    y = mu + X @ beta + spec.sigma * rng.standard_normal(n)
    return make_dataset(y, X, truth=(mu, beta, labels))


def adjusted_responses(dataset: Dataset) -> np.ndarray:
    """``y - X beta_ols`` with beta from the common-intercept OLS fit."""
    mu0, _, _, _ = admm.initial_state(dataset)
    return mu0


def _aligned_alpha(report_alpha, k_true):
    """Intercepts sorted ascending when the group count is right, else None."""
    if len(report_alpha) != k_true:
        return None
    return np.sort(np.asarray(report_alpha))


def _two_largest(partition):
    sizes = partition.sizes()
    order = sorted(range(partition.k_hat), key=lambda k: (-sizes[k], k))
    return order[0] + 1, order[1] + 1


def run_method(dataset: Dataset, method: MethodSpec, config: SolverConfig, workspace=None) -> dict:
    """Fit one method on one dataset and collect every per-replication statistic."""
    truth = dataset.truth
    rec = {"method": method.label}
    fit = None
    if method.family.lower() == "oracle":
        part = make_partition(truth.labels)
        report = inference.infer(dataset, part)
        mu_hat = report.alpha_hat[part.assignment - 1]
        rec.update(iters=0, converged=True, lam=float("nan"))
    else:
        ws = workspace or admm.precompute(dataset, config)
        if method.lam is None:
            path = pathsel.select_lambda(
                pathsel.solution_path(dataset, method.penalty(), config, c=method.c, workspace=ws),
                dataset)
            entry = path.best
            fit, part = entry.fit, entry.partition
        else:
            fit = admm.fit(dataset, method.penalty(method.lam), config, workspace=ws)
            part = pathsel.extract_partition(fit)
        report = inference.infer(dataset, part, fit)
        mu_hat = part.alpha[part.assignment - 1]
        rec.update(iters=fit.iters, converged=fit.converged, lam=fit.lam,
                   primal=fit.primal_residual_norm, dual=fit.dual_residual_norm, tol=fit.tol)
    k_true = int(truth.labels.max())
    rec["k_hat"] = part.k_hat
    rec["rmse_mu"] = metrics.rmse_mu(mu_hat, truth.mu)
    rec["rmse_beta"] = metrics.rmse_beta(report.beta_hat, truth.beta) if dataset.p else float("nan")
    rec["rand_index"] = metrics.rand_index(truth.labels, part.assignment)
    rec["sigma2_hat"] = report.sigma2_hat
    al = _aligned_alpha(report.alpha_hat, k_true)
    if al is not None:
        order = np.argsort(report.alpha_hat)
        rec["alpha_hat"] = al.tolist()
        rec["alpha_se"] = report.se_alpha[order].tolist()
        rec["alpha_true"] = np.sort(np.unique(truth.mu)).tolist()
    if part.k_hat >= 2:
        g1, g2 = _two_largest(part)
        rec["p_diff"] = inference.test_group_difference(report, g1, g2)[1]
        rec["p_hetero"] = inference.test_heterogeneity(dataset, part, fit)[1]
    else:
        # a single group carries no evidence of a difference
        rec["p_diff"] = 1.0
        rec["p_hetero"] = float("nan")
    return rec


def run_replication(spec: StudySpec, rep_index: int) -> list:
    ds = gen_example(spec, rep_index)
    config = spec.solver()
    ws = admm.precompute(ds, config)
    out = []
    for m in spec.methods:
        try:
            rec = run_method(ds, m, config, ws)
        except (PairFuseError, np.linalg.LinAlgError) as exc:
            logger.warning("rep %d, %s failed: %s", rep_index, m.label, exc)
            rec = {"method": m.label, "error": f"{type(exc).__name__}: {exc}"}
        rec["rep"] = rep_index
        out.append(rec)
    return out


def _stats(values):
    v = np.asarray([x for x in values if x is not None and not (isinstance(x, float) and math.isnan(x))],
                   dtype=float)
    if v.size == 0:
        return {"mean": None, "median": None, "se": None, "count": 0}
    return {"mean": float(v.mean()), "median": float(np.median(v)),
            "se": float(v.std(ddof=1)) if v.size > 1 else None, "count": int(v.size)}


@dataclass
class StudySummary:
    spec: StudySpec
    records: list                 # per replication, per method, in rep order
    table: dict = field(default_factory=dict)

    def method(self, label: str) -> dict:
        return self.table[label]

    def records_for(self, label: str) -> list:
        return [r for r in self.records if r["method"] == label]


def summarise(spec: StudySpec, records: list) -> StudySummary:
    table = {}
    for m in spec.methods:
        rows = [r for r in records if r["method"] == m.label]
        ok = [r for r in rows if "error" not in r]
        t = {"reps": len(rows), "failures": len(rows) - len(ok)}
        for key in ("k_hat", "rmse_mu", "rmse_beta", "rand_index", "p_diff", "p_hetero",
                    "sigma2_hat", "iters"):
            t[key] = _stats([r.get(key) for r in ok])
        t["converged_frac"] = (sum(bool(r.get("converged")) for r in ok) / len(ok)) if ok else None
        aligned = [r for r in ok if "alpha_hat" in r]
        t["aligned_reps"] = len(aligned)
        if aligned:
            est = np.array([r["alpha_hat"] for r in aligned])
            se = np.array([r["alpha_se"] for r in aligned])
            tru = np.array(aligned[0]["alpha_true"])
            t["alpha_bias"] = (est.mean(axis=0) - tru).tolist()
            t["alpha_ase"] = se.mean(axis=0).tolist()
            t["alpha_ese"] = est.std(axis=0, ddof=1).tolist() if len(aligned) > 1 else None
        table[m.label] = t
    return StudySummary(spec, records, table)


def run_study(spec: StudySpec, n_jobs: int = 1) -> StudySummary:
    """Run all replications and aggregate per method.

    Results are merged by replication index, so ``n_jobs`` changes only the
    wall-clock time, never the numbers.
    """
    idx = range(spec.reps)
    if n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as ex:
            chunks = list(ex.map(run_replication, [spec] * spec.reps, idx))
    else:
        chunks = [run_replication(spec, r) for r in idx]
    records = [rec for chunk in chunks for rec in chunk]
    return summarise(spec, records)


SUMMARY_COLUMNS = ("method", "reps", "failures",
                   "k_hat_mean", "k_hat_median", "k_hat_se",
                   "rmse_mu_mean", "rmse_mu_se", "rmse_beta_mean", "rmse_beta_se",
                   "rand_index_mean", "rand_index_se",
                   "p_diff_mean", "p_hetero_median",
                   "alpha1_bias", "alpha2_bias", "alpha1_ase", "alpha2_ase",
                   "alpha1_ese", "alpha2_ese", "converged_frac")


def summary_rows(summary: StudySummary) -> list:
    rows = []
    for label, t in summary.table.items():
        def pick(key, stat):
            return t[key][stat]

        def alpha(key, i):
            v = t.get(key)
            return v[i] if v is not None and len(v) > i else None

        rows.append({
            "method": label, "reps": t["reps"], "failures": t["failures"],
            "k_hat_mean": pick("k_hat", "mean"), "k_hat_median": pick("k_hat", "median"),
            "k_hat_se": pick("k_hat", "se"),
            "rmse_mu_mean": pick("rmse_mu", "mean"), "rmse_mu_se": pick("rmse_mu", "se"),
            "rmse_beta_mean": pick("rmse_beta", "mean"), "rmse_beta_se": pick("rmse_beta", "se"),
            "rand_index_mean": pick("rand_index", "mean"), "rand_index_se": pick("rand_index", "se"),
            "p_diff_mean": pick("p_diff", "mean"), "p_hetero_median": pick("p_hetero", "median"),
            "alpha1_bias": alpha("alpha_bias", 0), "alpha2_bias": alpha("alpha_bias", 1),
            "alpha1_ase": alpha("alpha_ase", 0), "alpha2_ase": alpha("alpha_ase", 1),
            "alpha1_ese": alpha("alpha_ese", 0), "alpha2_ese": alpha("alpha_ese", 1),
            "converged_frac": t["converged_frac"],
        })
    return rows


def write_summary_csv(summary: StudySummary, fh, header_config: Optional[dict] = None) -> None:
    """Method x statistic table; empty cells mark undefined statistics."""
    if header_config is not None:
        fh.write("# config: " + json.dumps(header_config, sort_keys=True) + "\n")
    w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in summary_rows(summary):
        w.writerow({k: ("" if v is None else (repr(v) if isinstance(v, float) else v))
                    for k, v in row.items()})


def write_adjusted_responses(spec: StudySpec, fh) -> None:
    """Emit ``y - X beta_ols`` per replication for external mixture-model software."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["rep", "subject", "adjusted_y", "true_label"])
    for r in range(spec.reps):
        ds = gen_example(spec, r)
        for i, (v, lab) in enumerate(zip(adjusted_responses(ds), ds.truth.labels), start=1):
            w.writerow([r, i, repr(float(v)), int(lab)])
