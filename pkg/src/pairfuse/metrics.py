"""Clustering agreement/quality indices and estimation-error summaries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import NumericalError, PairFuseError, SingleGroup, SubgroupPartition, canonical_labels


class LengthMismatch(PairFuseError, ValueError):
    pass


class EmptyBeta(PairFuseError, ValueError):
    pass


class CoincidentCentroids(NumericalError):
    pass


@dataclass(frozen=True)
class ClusterScore:
    rand_index: float
    rmse_mu: float
    davies_bouldin: Optional[float] = None
    rmse_beta: Optional[float] = None


def _comb2(x):
    x = np.asarray(x, dtype=np.int64)
    return x * (x - 1) // 2


def rand_index(labels_true, labels_pred) -> float:
    """Fraction of subject pairs on which the two labelings agree.

    Counted from the contingency table: pairs together in both (TP) plus
    pairs apart in both (TN), over n(n-1)/2.
    """
    a = np.asarray(labels_true)
    b = np.asarray(labels_pred)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"label vectors differ in shape: {a.shape} vs {b.shape}")
    n = a.shape[0]
    if n < 2:
        raise LengthMismatch("need at least two subjects")
    ca, cb = canonical_labels(a) - 1, canonical_labels(b) - 1
    table = np.zeros((ca.max() + 1, cb.max() + 1), dtype=np.int64)
    np.add.at(table, (ca, cb), 1)
    tp = _comb2(table).sum()
    same_a = _comb2(table.sum(axis=1)).sum()
    same_b = _comb2(table.sum(axis=0)).sum()
    total = n * (n - 1) // 2
    tn = total - same_a - same_b + tp
    return float(tp + tn) / total


def davies_bouldin(values, partition) -> float:
    """One-dimensional Davies-Bouldin index.

    Centroids are group means, spread is the mean absolute deviation from
    the centroid and separation the absolute centroid difference.

    Parameters
    ----------
    values : array_like, shape (n,)
        Typically covariate-adjusted responses ``y - X beta_hat``.
    partition : SubgroupPartition or array_like of labels
    """
    v = np.asarray(values, dtype=float)
    labels = partition.assignment if isinstance(partition, SubgroupPartition) else canonical_labels(partition)
    labels = np.asarray(labels)
    if labels.shape != v.shape:
        raise LengthMismatch("values and labels differ in length")
    ks = np.unique(labels)
    if ks.size < 2:
        raise SingleGroup("Davies-Bouldin needs at least two groups")
    cent = np.array([v[labels == k].mean() for k in ks])
    spread = np.array([np.abs(v[labels == k] - c).mean() for k, c in zip(ks, cent)])
    sep = np.abs(cent[:, None] - cent[None, :])
    off = ~np.eye(ks.size, dtype=bool)
    if np.any(sep[off] == 0):
        raise CoincidentCentroids("two groups share a centroid")
    ratio = np.where(off, (spread[:, None] + spread[None, :]) / np.where(off, sep, 1.0), -np.inf)
    return float(ratio.max(axis=1).mean())


def rmse_mu(mu_hat, mu_true) -> float:
    """``||mu_hat - mu_true|| / sqrt(n)``."""
    a, b = np.asarray(mu_hat, dtype=float), np.asarray(mu_true, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch("mu vectors differ in length")
    return float(np.linalg.norm(a - b) / np.sqrt(a.size))


def rmse_beta(beta_hat, beta_true) -> float:
    """``||beta_hat - beta_true|| / sqrt(p)``; undefined when p = 0."""
    a, b = np.asarray(beta_hat, dtype=float), np.asarray(beta_true, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch("beta vectors differ in length")
    if a.size == 0:
        raise EmptyBeta("rmse_beta needs p >= 1")
    return float(np.linalg.norm(a - b) / np.sqrt(a.size))
