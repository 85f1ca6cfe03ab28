"""Solution paths over lambda, subgroup extraction and modified-BIC selection."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import admm
from .core import (Dataset, FusionFit, NumericalError, PairFuseError, PenaltySpec,
                   SolverConfig, SubgroupPartition, make_partition)

DEFAULT_BIC_C = 5.0


class NoFusionAchievable(PairFuseError, RuntimeError):
    pass


class DegenerateRSS(NumericalError):
    pass


class NoConvergedEntry(PairFuseError, RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class PathEntry:
    lam: float
    fit: FusionFit
    partition: SubgroupPartition
    bic: float

    @property
    def k_hat(self) -> int:
        return self.partition.k_hat


@dataclass(frozen=True, eq=False)
class PathResult:
    entries: tuple
    selected: Optional[int] = None
    c_n: float = float("nan")
    c: float = DEFAULT_BIC_C

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([e.lam for e in self.entries])

    @property
    def k_hats(self) -> np.ndarray:
        return np.array([e.k_hat for e in self.entries])

    @property
    def best(self) -> PathEntry:
        if self.selected is None:
            raise ValueError("path has no selected entry; call select_lambda first")
        return self.entries[self.selected]


def extract_partition(fit: FusionFit) -> SubgroupPartition:
    """Groups are connected components of the graph of pairs with eta exactly 0.

    Transitive closure decides membership, so i and k share a group whenever
    eta_ij = eta_jk = 0 even if eta_ik is nonzero.  Group intercepts are the
    within-group means of mu.
    """
    n = fit.n
    i, j = admm._pairs(n)
    zero = fit.eta == 0.0
    graph = coo_matrix((np.ones(int(zero.sum())), (i[zero], j[zero])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return make_partition(labels, fit.mu)


def bic_constant(n: int, p: int, c: float) -> float:
    """``C_n = c log(log(n + p))``."""
    if not c > 0:
        raise ValueError(f"BIC constant c must be positive, got {c}")
    val = c * math.log(math.log(n + p))
    if not val > 0:
        raise ValueError(f"C_n = {val:g} is not positive for n + p = {n + p}")
    return val


def modified_bic(fit: FusionFit, partition: SubgroupPartition, dataset: Dataset,
                 c: float = DEFAULT_BIC_C) -> float:
    """``log(RSS/n) + C_n (log n / n)(K + p)`` with per-subject fitted intercepts."""
    n, p = dataset.n, dataset.p
    resid = dataset.y - fit.mu - (dataset.X @ fit.beta if p else 0.0)
    rss = float(resid @ resid)
    if not rss > 0:
        raise DegenerateRSS("residual sum of squares is zero; BIC is -inf")
    return math.log(rss / n) + bic_constant(n, p, c) * math.log(n) / n * (partition.k_hat + p)


def _fit_k(dataset, spec, config, ws, init=None):
    f = admm.fit(dataset, spec, config, init=init, workspace=ws)
    return f, extract_partition(f)


def _safe_bic(fit, part, dataset, c):
    # an interpolating fit has log(RSS) = -inf; keep it out of the running
    try:
        return modified_bic(fit, part, dataset, c)
    except DegenerateRSS:
        return math.inf


def _entry(dataset, spec, config, ws, lam, c, init):
    f, part = _fit_k(dataset, spec.with_lambda(lam), config, ws, init=init)
    return PathEntry(float(lam), f, part, _safe_bic(f, part, dataset, c))


def find_lambda_max(dataset: Dataset, spec: PenaltySpec, config: SolverConfig,
                    guess: Optional[float] = None, max_doublings: int = 60,
                    workspace=None) -> float:
    """Smallest probe ``guess * 2^k`` whose fit collapses to a single group.

    Each probe is warm-started from the previous one, mirroring how the
    solution path moves along lambda: with concave penalties a separated
    configuration can survive past the lambda at which a cold start fuses.
    """
    ws = workspace or admm.precompute(dataset, config)
    if guess is None:
        mu0 = admm.initial_state(dataset)[0]
        spread = float(mu0.max() - mu0.min())
        guess = spread / dataset.n if spread > 0 else 1.0
    lam = float(guess)
    prev = None
    for _ in range(max_doublings + 1):
        prev, part = _fit_k(dataset, spec.with_lambda(lam), config, ws, init=prev)
        if part.k_hat == 1:
            return lam
        lam *= 2.0
    raise NoFusionAchievable(f"no single-group fit found up to lambda={lam / 2:g}")


def _grid_probe(spec: PenaltySpec) -> PenaltySpec:
    # the DC step never shrinks a pair already tau apart, so a TruncatedL1 fit
    # from OLS need not ever fuse; its convex majorant (plain L1) sets the range
    if spec.family == "TruncatedL1":
        return PenaltySpec("L1", lam=spec.lam)
    return spec


def lambda_grid(dataset: Dataset, spec: PenaltySpec, config: Optional[SolverConfig] = None,
                num_points: int = 50, min_ratio: float = 0.01, workspace=None) -> np.ndarray:
    """Log-spaced grid on ``[min_ratio * lambda_max, lambda_max]``.

    ``lambda_max`` comes from :func:`find_lambda_max`; only the family and
    shape parameters of ``spec`` matter here.  For TruncatedL1 the search
    uses the L1 penalty, which majorizes it.
    """
    if num_points < 2:
        raise ValueError("num_points must be >= 2")
    if not 0 < min_ratio < 1:
        raise ValueError("min_ratio must lie in (0, 1)")
    config = config or SolverConfig()
    spec.validate_with(config)
    lmax = find_lambda_max(dataset, _grid_probe(spec), config, workspace=workspace)
    grid = np.geomspace(min_ratio * lmax, lmax, num_points)
    grid[0], grid[-1] = min_ratio * lmax, lmax
    return grid


def solution_path(dataset: Dataset, spec: PenaltySpec, config: Optional[SolverConfig] = None,
                  grid: Optional[Sequence[float]] = None, c: float = DEFAULT_BIC_C,
                  warm_start: bool = True, workspace=None, max_extend: int = 30) -> PathResult:
    """Fit every lambda in increasing order, warm-starting from the previous fit.

    With ``warm_start=False`` every grid point is a cold start, so entries are
    independent of each other.  BIC is recorded with constant ``c`` but no
    entry is selected yet.

    When ``grid`` is None the grid comes from :func:`lambda_grid`, and if the
    last point still has several groups the path is extended by doubling
    lambda until everything fuses, so an automatic path always ends at K = 1
    (TruncatedL1 excepted, see :func:`lambda_grid`).
    """
    config = config or SolverConfig()
    spec.validate_with(config)
    ws = workspace or admm.precompute(dataset, config)
    auto = grid is None
    if auto:
        grid = lambda_grid(dataset, spec, config, workspace=ws)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    entries = []
    prev = None
    for lam in grid:
        entries.append(_entry(dataset, spec, config, ws, lam, c, prev if warm_start else None))
        prev = entries[-1].fit
    extra = 0
    while auto and spec.family != "TruncatedL1" and entries[-1].k_hat > 1:
        if extra == max_extend:
            raise NoFusionAchievable("path did not fuse to a single group")
        lam = 2.0 * entries[-1].lam
        entries.append(_entry(dataset, spec, config, ws, lam, c, prev if warm_start else None))
        prev = entries[-1].fit
        extra += 1
    return PathResult(tuple(entries), None, bic_constant(dataset.n, dataset.p, c), c)


def select_lambda(path: PathResult, dataset: Dataset, c: Optional[float] = None) -> PathResult:
    """Pick the converged entry of smallest BIC; ties go to the larger lambda."""
    if not path.entries:
        raise NoConvergedEntry("empty path")
    c = path.c if c is None else c
    entries = [replace(e, bic=_safe_bic(e.fit, e.partition, dataset, c)) for e in path.entries]
    cands = [k for k, e in enumerate(entries) if e.fit.converged]
    if not cands:
        raise NoConvergedEntry("no path entry converged")
    best = min(cands, key=lambda k: (entries[k].bic, -entries[k].lam))
    return PathResult(tuple(entries), best, bic_constant(dataset.n, dataset.p, c), c)


def path_to_tsv(path: PathResult, fh, header_config: Optional[dict] = None) -> None:
    """Write columns lambda, k_hat, bic, converged, mu_1..mu_n.

    An optional ``# config: {...}`` comment line is written first.
    """
    if header_config is not None:
        fh.write("# config: " + json.dumps(header_config, sort_keys=True) + "\n")
    n = path.entries[0].fit.n if path.entries else 0
    cols = ["lambda", "k_hat", "bic", "converged"] + [f"mu_{k}" for k in range(1, n + 1)]
    fh.write("\t".join(cols) + "\n")
    for e in path.entries:
        row = [repr(e.lam), str(e.k_hat), repr(e.bic), str(int(e.fit.converged))]
        row += [repr(float(m)) for m in e.fit.mu]
        fh.write("\t".join(row) + "\n")
