"""ADMM for least squares with pairwise fusion penalties on the intercepts.

The difference operator ``Delta`` (one row ``e_i - e_j`` per pair i < j) is
never formed.  The mu-update system ``I + vartheta Delta'Delta - Q_X`` equals
``a I - U C U'`` with ``a = 1 + n vartheta``, ``U = [1 X]`` and
``C = blockdiag(vartheta, (X'X)^{-1})``, so it is solved through a
(p+1)-dimensional capacitance system.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg as sla

from .core import (Dataset, DimensionMismatch, FusionFit, NumericalError, PenaltySpec,
                   SolverConfig, _frozen, num_pairs)
from .penalty import l1_weight, penalty_value, prox_eta

logger = logging.getLogger(__name__)


class SingularCapacitance(NumericalError):
    """``[1 X]`` is numerically rank deficient, so the mu-system is singular."""


@functools.lru_cache(maxsize=16)
def _pairs(n: int):
    i, j = np.triu_indices(n, k=1)
    i.setflags(write=False)
    j.setflags(write=False)
    return i, j


def delta_apply(mu) -> np.ndarray:
    """``Delta mu``: all pairwise differences ``mu_i - mu_j``, i < j."""
    mu = np.asarray(mu, dtype=float)
    i, j = _pairs(mu.shape[0])
    return mu[i] - mu[j]


def delta_t_apply(v, n: int) -> np.ndarray:
    """``Delta' v`` for a pair-indexed vector ``v`` of length n(n-1)/2.

    Component i is the sum of ``v`` over pairs (i, j > i) minus the sum over
    pairs (j < i, i).
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (num_pairs(n),):
        raise DimensionMismatch(f"expected {num_pairs(n)} pair entries, got shape {v.shape}")
    i, j = _pairs(n)
    buf = np.zeros((n, n))
    buf[i, j] = v
    # np.sum along a row uses pairwise summation; order is fixed, so results
    # do not depend on threading
    return buf.sum(axis=1) - buf.T.sum(axis=1)


@dataclass(frozen=True, eq=False)
class SolverWorkspace:
    """Factor-once data for repeated mu/beta updates on one dataset."""

    n: int
    p: int
    vartheta: float
    a: float
    U: np.ndarray
    cap_factor: tuple
    proj: np.ndarray          # (X'X)^{-1} X', shape (p, n)
    resid_y: np.ndarray       # (I - Q_X) y
    y: np.ndarray

    def solve(self, b) -> np.ndarray:
        """Apply ``(a I - U C U')^{-1}`` to ``b``."""
        b = np.asarray(b, dtype=float)
        w = sla.cho_solve(self.cap_factor, self.U.T @ b)
        return b / self.a + (self.U @ w) / (self.a * self.a)

    def dense_matrix(self) -> np.ndarray:
        """Materialise ``I + vartheta Delta'Delta - Q_X`` (testing aid)."""
        n = self.n
        M = (1 + n * self.vartheta) * np.eye(n) - self.vartheta * np.ones((n, n))
        if self.p:
            X = self.U[:, 1:]
            M -= X @ self.proj
        return M


def precompute(dataset: Dataset, config: SolverConfig) -> SolverWorkspace:
    """Build the cached mu-solve for ``dataset`` at ``config.vartheta``.

    Raises
    ------
    SingularCapacitance
        If ``[1 X]`` is numerically rank deficient (e.g. X already holds an
        intercept column).
    """
    n, p, vt = dataset.n, dataset.p, float(config.vartheta)
    X, y = dataset.X, dataset.y
    a = 1.0 + n * vt
    U = np.column_stack([np.ones(n), X])
    XtX = X.T @ X
    cinv = np.zeros((p + 1, p + 1))
    cinv[0, 0] = 1.0 / vt
    cinv[1:, 1:] = XtX
    S = cinv - (U.T @ U) / a
    S = 0.5 * (S + S.T)
    # compare on the correlation scale so the check is unit-free
    d = np.sqrt(np.abs(np.diag(S)))
    if np.any(d == 0):
        raise SingularCapacitance("capacitance system has a zero diagonal")
    ev = np.linalg.eigvalsh(S / np.outer(d, d))
    if ev[0] <= 1e-10 * max(ev[-1], 1.0):
        raise SingularCapacitance(
            f"smallest capacitance eigenvalue {ev[0]:.3g} is not positive; "
            "is an intercept-like column included in X?")
    factor = sla.cho_factor(S, lower=True)
    if p:
        proj = np.linalg.solve(XtX, X.T)
        resid_y = y - X @ (proj @ y)
    else:
        proj = np.empty((0, n))
        resid_y = y.copy()
    return SolverWorkspace(n, p, vt, a, _frozen(U), factor, _frozen(proj), _frozen(resid_y), dataset.y)


def update_mu_beta(ws: SolverWorkspace, y, eta, upsilon):
    """Exact minimisers of the augmented Lagrangian in (mu, beta).

    ``mu = M^{-1}{(I - Q_X) y + Delta'(vartheta eta - upsilon)}`` and
    ``beta = (X'X)^{-1} X'(y - mu)``.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (ws.n,):
        raise DimensionMismatch(f"y must have length {ws.n}")
    eta = np.asarray(eta, dtype=float)
    upsilon = np.asarray(upsilon, dtype=float)
    if y is ws.y or np.array_equal(y, ws.y):
        ry = ws.resid_y
    else:
        ry = y - (ws.U[:, 1:] @ (ws.proj @ y) if ws.p else 0.0)
    rhs = ry + delta_t_apply(ws.vartheta * eta - upsilon, ws.n)
    mu = ws.solve(rhs)
    beta = ws.proj @ (y - mu)
    return mu, beta


def pair_weights(dataset: Dataset, spec: PenaltySpec):
    """Pair weights for WeightedL1 (Gaussian kernel on y), else scalar 1."""
    if spec.family != "WeightedL1":
        return 1.0
    i, j = _pairs(dataset.n)
    return l1_weight(dataset.y[i], dataset.y[j], spec.phi)


def update_eta(mu, upsilon, spec: PenaltySpec, config: SolverConfig, prev_eta=None, weight=1.0):
    """Thresholding step applied independently to every pair."""
    delta = delta_apply(mu) + np.asarray(upsilon, dtype=float) / config.vartheta
    return prox_eta(delta, spec, config.vartheta, weight=weight, prev_eta=prev_eta)


def update_upsilon(upsilon, mu, eta, config: SolverConfig) -> np.ndarray:
    """Dual ascent ``upsilon + vartheta (Delta mu - eta)``."""
    return np.asarray(upsilon, dtype=float) + config.vartheta * (delta_apply(mu) - eta)


def residual_norms(mu, eta, eta_prev, config: SolverConfig):
    """Return ``(||Delta mu - eta||, ||vartheta Delta'(eta - eta_prev)||)``."""
    mu = np.asarray(mu, dtype=float)
    eta = np.asarray(eta, dtype=float)
    r = np.linalg.norm(delta_apply(mu) - eta)
    s = config.vartheta * np.linalg.norm(delta_t_apply(eta - np.asarray(eta_prev, dtype=float), mu.shape[0]))
    return float(r), float(s)


def objective(dataset: Dataset, spec: PenaltySpec, mu, beta) -> float:
    """Penalised least-squares criterion at (mu, beta)."""
    mu = np.asarray(mu, dtype=float)
    resid = dataset.y - mu - (dataset.X @ beta if dataset.p else 0.0)
    pen = penalty_value(spec, np.abs(delta_apply(mu)), weight=pair_weights(dataset, spec))
    return 0.5 * float(resid @ resid) + float(np.sum(pen))


def initial_state(dataset: Dataset):
    """Common-intercept least squares start: ``(mu0, beta0, eta0, upsilon0)``."""
    n, p = dataset.n, dataset.p
    if p:
        U = np.column_stack([np.ones(n), dataset.X])
        coef = np.linalg.lstsq(U, dataset.y, rcond=None)[0]
        beta0 = coef[1:]
        mu0 = dataset.y - dataset.X @ beta0
    else:
        beta0 = np.empty(0)
        mu0 = dataset.y.copy()
    eta0 = delta_apply(mu0)
    return mu0, beta0, eta0, np.zeros_like(eta0)


def fit(dataset: Dataset, spec: PenaltySpec, config: Optional[SolverConfig] = None,
        init: Optional[FusionFit] = None, workspace: Optional[SolverWorkspace] = None) -> FusionFit:
    """Run ADMM until the primal residual drops below tolerance.

    Parameters
    ----------
    dataset : Dataset
    spec : PenaltySpec
    config : SolverConfig, optional
    init : FusionFit, optional
        Warm start; otherwise the common-intercept least-squares start is used.
    workspace : SolverWorkspace, optional
        Reuse a factorisation across calls (must match dataset and vartheta).

    Returns
    -------
    FusionFit
        ``converged`` is False when ``max_iter`` is reached; that is not an error.
    """
    config = config or SolverConfig()
    spec.validate_with(config)
    n = dataset.n
    ws = workspace if workspace is not None else precompute(dataset, config)
    if ws.n != n or ws.vartheta != config.vartheta:
        raise DimensionMismatch("workspace does not match dataset/config")
    tol = config.tolerance(n)
    vt = config.vartheta
    weight = pair_weights(dataset, spec)
    i, j = _pairs(n)

    if init is None:
        mu, beta, eta, ups = initial_state(dataset)
    else:
        if init.mu.shape != (n,) or init.eta.shape != (num_pairs(n),):
            raise DimensionMismatch("warm start does not match dataset size")
        mu, beta = np.array(init.mu), np.array(init.beta)
        eta, ups = np.array(init.eta), np.array(init.upsilon)

    y = dataset.y
    have_x = ws.p > 0
    primal_hist, dual_hist = [], []
    r_norm = s_norm = float("inf")
    converged = False
    it = 0
    for it in range(1, int(config.max_iter) + 1):
        rhs = ws.resid_y + delta_t_apply(vt * eta - ups, n)
        mu = ws.solve(rhs)
        dmu = mu[i] - mu[j]
        eta_new = prox_eta(dmu + ups / vt, spec, vt, weight=weight, prev_eta=eta)
        r = dmu - eta_new
        ups = ups + vt * r
        r_norm = float(np.sqrt(r @ r))
        if config.record_dual:
            s_norm = vt * float(np.linalg.norm(delta_t_apply(eta_new - eta, n)))
            dual_hist.append(s_norm)
        eta = eta_new
        primal_hist.append(r_norm)
        if r_norm < tol:
            converged = True
            break
    beta = ws.proj @ (y - mu) if have_x else np.empty(0)
    if not converged:
        logger.debug("ADMM hit max_iter=%d at lambda=%g (primal %.3g, tol %.3g)",
                     config.max_iter, spec.lam, r_norm, tol)
    if not config.record_dual:
        s_norm = float("nan")
    return FusionFit(
        mu=_frozen(mu), beta=_frozen(beta), eta=_frozen(eta), upsilon=_frozen(ups),
        iters=it, primal_residual_norm=r_norm, dual_residual_norm=s_norm,
        converged=converged, lam=float(spec.lam), tol=tol,
        primal_history=_frozen(primal_hist), dual_history=_frozen(dual_hist),
    )
