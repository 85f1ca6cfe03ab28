"""Shared data model for pairwise-fusion subgroup analysis.

Every structure here is immutable after construction: numpy arrays are
copied and flagged read-only so fits and partitions can be shared freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class PairFuseError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(PairFuseError, ValueError):
    pass


class RankDeficientX(PairFuseError, ValueError):
    pass


class TooFewObservations(PairFuseError, ValueError):
    pass


class IndexOutOfRange(PairFuseError, IndexError):
    pass


class NotStrictlyOrdered(PairFuseError, ValueError):
    pass


class InvalidShapeParameter(PairFuseError, ValueError):
    pass


class NumericalError(PairFuseError, ArithmeticError):
    """Raised when a linear system or statistic is numerically degenerate."""


class SingleGroup(PairFuseError, ValueError):
    """A statistic that compares groups was asked about a single group."""


PENALTY_FAMILIES = ("L1", "WeightedL1", "MCP", "SCAD", "TruncatedL1")

_FAMILY_ALIASES = {f.lower(): f for f in PENALTY_FAMILIES}
_FAMILY_ALIASES.update({"lasso": "L1", "wl1": "WeightedL1", "tl1": "TruncatedL1",
                        "weighted_l1": "WeightedL1", "truncated_l1": "TruncatedL1"})


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def canonical_family(name: str) -> str:
    """Map a user-facing penalty name (case-insensitive) to its canonical tag."""
    try:
        return _FAMILY_ALIASES[name.lower()]
    except KeyError:
        raise InvalidShapeParameter(
            f"unknown penalty family {name!r}; expected one of {PENALTY_FAMILIES}"
        ) from None


@dataclass(frozen=True)
class Truth:
    mu: np.ndarray
    beta: np.ndarray
    labels: np.ndarray


@dataclass(frozen=True, eq=False)
class Dataset:
    """Response ``y`` (n,), covariates ``X`` (n, p) and optional ground truth."""

    y: np.ndarray
    X: np.ndarray
    names: Optional[tuple] = None
    truth: Optional[Truth] = None

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def make_dataset(y, X=None, truth=None, names: Optional[Sequence[str]] = None) -> Dataset:
    """Validate inputs and build a :class:`Dataset`.

    Parameters
    ----------
    y : array_like, shape (n,)
    X : array_like, shape (n, p), optional
        ``None`` or a zero-column array means no covariates.
    truth : tuple (mu0, beta0, labels) or Truth, optional
    names : sequence of str, optional
        Covariate column labels, length p.

    Raises
    ------
    TooFewObservations, DimensionMismatch, RankDeficientX
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise DimensionMismatch(f"y must be one-dimensional, got shape {y.shape}")
    n = y.shape[0]
    if n < 2:
        raise TooFewObservations(f"need at least two observations, got {n}")
    if X is None:
        X = np.empty((n, 0))
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(n, 0)
    if X.ndim != 2:
        raise DimensionMismatch(f"X must be two-dimensional, got shape {X.shape}")
    if X.shape[0] != n:
        raise DimensionMismatch(f"X has {X.shape[0]} rows but y has length {n}")
    p = X.shape[1]
    if p >= n:
        raise DimensionMismatch(f"need p < n, got p={p}, n={n}")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
        raise DimensionMismatch("y and X must be finite")
    if p > 0 and np.linalg.matrix_rank(X) < p:
        raise RankDeficientX("X does not have full column rank")
    if names is not None:
        names = tuple(str(s) for s in names)
        if len(names) != p:
            raise DimensionMismatch(f"got {len(names)} names for {p} columns")

    if truth is not None and not isinstance(truth, Truth):
        mu0, beta0, labels = truth
        truth = Truth(_frozen(mu0), _frozen(beta0), _frozen(labels, dtype=int))
    elif truth is not None:
        truth = Truth(_frozen(truth.mu), _frozen(truth.beta), _frozen(truth.labels, dtype=int))
    if truth is not None:
        if truth.mu.shape != (n,) or truth.beta.shape != (p,) or truth.labels.shape != (n,):
            raise DimensionMismatch("truth must carry mu0 (n,), beta0 (p,), labels (n,)")

    return Dataset(_frozen(y), _frozen(X), names, truth)


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family and its shape parameters.

    ``gamma`` is the MCP/SCAD concavity, ``tau`` the truncated-L1 threshold and
    ``phi`` the Gaussian-kernel bandwidth of the weighted L1 penalty.
    """

    family: str = "MCP"
    lam: float = 1.0
    gamma: Optional[float] = None
    tau: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", canonical_family(self.family))
        if self.gamma is None:
            object.__setattr__(self, "gamma", 3.7 if self.family == "SCAD" else 3.0)
        if not self.lam > 0 or not math.isfinite(self.lam):
            raise InvalidShapeParameter(f"lambda must be positive and finite, got {self.lam}")
        if self.family == "TruncatedL1" and not self.tau > 0:
            raise InvalidShapeParameter(f"tau must be positive, got {self.tau}")
        if self.family == "WeightedL1" and not self.phi >= 0:
            raise InvalidShapeParameter(f"phi must be nonnegative, got {self.phi}")

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(self.family, float(lam), self.gamma, self.tau, self.phi)

    def validate_with(self, config: "SolverConfig") -> None:
        """Check that each scalar eta-subproblem is convex for this ``vartheta``."""
        vt = config.vartheta
        if self.family == "MCP" and not self.gamma > 1.0 / vt:
            raise InvalidShapeParameter(
                f"MCP needs gamma > 1/vartheta = {1.0 / vt:g}, got gamma={self.gamma:g}")
        if self.family == "SCAD" and not self.gamma > 1.0 / vt + 1.0:
            raise InvalidShapeParameter(
                f"SCAD needs gamma > 1/vartheta + 1 = {1.0 / vt + 1.0:g}, got gamma={self.gamma:g}")

    def to_dict(self) -> dict:
        return {"family": self.family, "lambda": self.lam, "gamma": self.gamma,
                "tau": self.tau, "phi": self.phi}


@dataclass(frozen=True)
class SolverConfig:
    """ADMM settings.

    ``tol_primal=None`` resolves to ``1e-4 * sqrt(n(n-1)/2)`` once n is known.
    """

    vartheta: float = 1.0
    tol_primal: Optional[float] = None
    max_iter: int = 1000
    record_dual: bool = True

    def __post_init__(self):
        if not self.vartheta > 0:
            raise InvalidShapeParameter(f"vartheta must be positive, got {self.vartheta}")
        if self.tol_primal is not None and not self.tol_primal > 0:
            raise InvalidShapeParameter(f"tol_primal must be positive, got {self.tol_primal}")
        if int(self.max_iter) < 1:
            raise InvalidShapeParameter(f"max_iter must be >= 1, got {self.max_iter}")

    def tolerance(self, n: int) -> float:
        if self.tol_primal is not None:
            return float(self.tol_primal)
        return 1e-4 * math.sqrt(n * (n - 1) / 2)

    def to_dict(self) -> dict:
        return {"vartheta": self.vartheta, "tol_primal": self.tol_primal,
                "max_iter": int(self.max_iter), "record_dual": self.record_dual}


@dataclass(frozen=True, eq=False)
class FusionFit:
    mu: np.ndarray
    beta: np.ndarray
    eta: np.ndarray
    upsilon: np.ndarray
    iters: int
    primal_residual_norm: float
    dual_residual_norm: float
    converged: bool
    lam: float
    tol: float = float("nan")
    primal_history: np.ndarray = field(default_factory=lambda: _frozen([]))
    dual_history: np.ndarray = field(default_factory=lambda: _frozen([]))

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam, "iters": self.iters, "converged": self.converged,
            "tol": self.tol,
            "primal_residual_norm": self.primal_residual_norm,
            "dual_residual_norm": self.dual_residual_norm,
            "mu": self.mu.tolist(), "beta": self.beta.tolist(),
            "eta": self.eta.tolist(), "upsilon": self.upsilon.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FusionFit":
        return cls(
            mu=_frozen(d["mu"]), beta=_frozen(d["beta"]), eta=_frozen(d["eta"]),
            upsilon=_frozen(d["upsilon"]), iters=int(d["iters"]),
            primal_residual_norm=float(d["primal_residual_norm"]),
            dual_residual_norm=float(d["dual_residual_norm"]),
            converged=bool(d["converged"]), lam=float(d["lambda"]),
            tol=float(d.get("tol", float("nan"))),
        )


@dataclass(frozen=True, eq=False)
class SubgroupPartition:
    """Group labels 1..K, canonical: ordered by each group's smallest member."""

    assignment: np.ndarray
    k_hat: int
    alpha: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, SubgroupPartition):
            return NotImplemented
        return (self.k_hat == other.k_hat
                and np.array_equal(self.assignment, other.assignment)
                and np.array_equal(self.alpha, other.alpha))

    def groups(self) -> list:
        """Zero-based member indices of each group, in label order."""
        return [np.flatnonzero(self.assignment == k) for k in range(1, self.k_hat + 1)]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k_hat + 1)[1:]

    def to_dict(self) -> dict:
        return {"k_hat": self.k_hat, "assignment": self.assignment.tolist(),
                "alpha": self.alpha.tolist()}


def canonical_labels(labels) -> np.ndarray:
    """Relabel arbitrary group labels as 1..K in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return (order[inverse.ravel()] + 1).astype(int)


def make_partition(labels, mu=None) -> SubgroupPartition:
    """Build a canonical partition; ``alpha`` holds per-group means of ``mu``.

    Without ``mu`` the intercepts are NaN (structure only).
    """
    assign = canonical_labels(labels)
    k = int(assign.max())
    if mu is None:
        alpha = np.full(k, np.nan)
    else:
        mu = np.asarray(mu, dtype=float)
        sums = np.bincount(assign, weights=mu, minlength=k + 1)[1:]
        alpha = sums / np.bincount(assign, minlength=k + 1)[1:]
    return SubgroupPartition(_frozen(assign, dtype=int), k, _frozen(alpha))


def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(i: int, j: int, n: int) -> int:
    """Flat row-major index of the 1-based pair (i, j), i < j.

    >>> pair_index(2, 3, 3)
    2
    """
    if not (1 <= i <= n and 1 <= j <= n):
        raise IndexOutOfRange(f"pair ({i}, {j}) outside 1..{n}")
    if not i < j:
        raise NotStrictlyOrdered(f"need i < j, got ({i}, {j})")
    # pairs before row i: sum_{r=1}^{i-1} (n - r)
    return (i - 1) * n - (i - 1) * i // 2 + (j - i - 1)


def pair_from_index(k: int, n: int) -> tuple:
    """Inverse of :func:`pair_index`."""
    m = num_pairs(n)
    if not 0 <= k < m:
        raise IndexOutOfRange(f"flat index {k} outside 0..{m - 1}")
    # largest i with pair_index(i, i+1) <= k
    i = int(n - 0.5 - math.sqrt((n - 0.5) ** 2 - 2 * k))
    i = max(i, 0)
    while pair_index(i + 1, i + 2, n) > k:
        i -= 1
    while i + 2 <= n - 1 and pair_index(i + 2, i + 3, n) <= k:
        i += 1
    start = pair_index(i + 1, i + 2, n)
    return i + 1, i + 2 + (k - start)


def pair_arrays(n: int) -> tuple:
    """Zero-based (first, second) member arrays of all pairs in canonical order."""
    return np.triu_indices(n, k=1)
