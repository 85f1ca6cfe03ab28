"""Fusion penalties and their scalar thresholding operators.

The thresholding operators minimise ``(vartheta/2)(delta - eta)^2 + p(|eta|)``
elementwise; every function accepts scalars or numpy arrays of ``delta``.
"""

from __future__ import annotations

import numpy as np

from .core import InvalidShapeParameter, PenaltySpec, canonical_family


def soft_threshold(t, lam):
    """``sign(t) * max(|t| - lam, 0)``."""
    t = np.asarray(t, dtype=float)
    out = np.sign(t) * np.maximum(np.abs(t) - lam, 0.0)
    return out if out.ndim else float(out)


def l1_weight(y_i, y_j, phi):
    """Gaussian-kernel weight ``exp(-phi (y_i - y_j)^2)``; ``phi=0`` gives 1."""
    d = np.asarray(y_i, dtype=float) - np.asarray(y_j, dtype=float)
    out = np.exp(-phi * d * d)
    return out if out.ndim else float(out)


def penalty_value(spec: PenaltySpec, t, weight=1.0):
    """Penalty ``p(t, lambda)`` for ``t >= 0``, in closed form.

    MCP and SCAD are the integrals of their derivative definitions,
    evaluated piecewise:

    * MCP: ``lam t - t^2/(2 gamma)`` up to ``gamma lam``, then ``gamma lam^2 / 2``.
    * SCAD: ``lam t`` up to ``lam``; ``(gamma lam t - (t^2 + lam^2)/2)/(gamma - 1)``
      up to ``gamma lam``; then ``lam^2 (gamma + 1) / 2``.

    ``weight`` multiplies the WeightedL1 penalty and is ignored otherwise.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("penalty_value takes nonnegative arguments")
    lam, g = spec.lam, spec.gamma
    fam = spec.family
    if fam == "L1":
        out = lam * t
    elif fam == "WeightedL1":
        out = weight * lam * t
    elif fam == "TruncatedL1":
        out = lam * np.minimum(t, spec.tau)
    elif fam == "MCP":
        if not g > 0:
            raise InvalidShapeParameter(f"MCP needs gamma > 0, got {g}")
        out = np.where(t <= g * lam, lam * t - t * t / (2 * g), 0.5 * g * lam * lam)
    elif fam == "SCAD":
        if not g > 1:
            raise InvalidShapeParameter(f"SCAD needs gamma > 1, got {g}")
        mid = (g * lam * t - 0.5 * (t * t + lam * lam)) / (g - 1)
        out = np.where(t <= lam, lam * t,
                       np.where(t <= g * lam, mid, 0.5 * lam * lam * (g + 1)))
    else:  # pragma: no cover - canonical_family guards this
        raise InvalidShapeParameter(fam)
    return out if out.ndim else float(out)


def _mcp_prox(delta, lam, gamma, vt):
    ad = np.abs(delta)
    shrunk = soft_threshold(delta, lam / vt) / (1.0 - 1.0 / (gamma * vt))
    return np.where(ad <= gamma * lam, shrunk, delta)


def _scad_prox(delta, lam, gamma, vt):
    ad = np.abs(delta)
    low = soft_threshold(delta, lam / vt)
    mid = (soft_threshold(delta, gamma * lam / ((gamma - 1.0) * vt))
           / (1.0 - 1.0 / ((gamma - 1.0) * vt)))
    return np.where(ad <= lam + lam / vt, low, np.where(ad <= gamma * lam, mid, delta))


def prox_eta(delta, spec: PenaltySpec, vartheta: float, weight=1.0, prev_eta=None):
    """Closed-form eta update for one or many pairs.

    Parameters
    ----------
    delta : float or ndarray
        ``mu_i - mu_j + upsilon_ij / vartheta``.
    spec : PenaltySpec
    vartheta : float
        ADMM penalty parameter.
    weight : float or ndarray
        Pair weights, used only by WeightedL1.
    prev_eta : float or ndarray
        Current eta iterate, required by TruncatedL1 (one DC-majorisation step:
        keep ``delta`` where ``|prev_eta| >= tau``, soft-threshold elsewhere).

    Returns
    -------
    float or ndarray
        Same shape as ``delta``. For L1, MCP and SCAD this is the exact
        unique minimiser, with zeros returned as exact 0.0.
    """
    fam = canonical_family(spec.family)
    if not vartheta > 0:
        raise InvalidShapeParameter(f"vartheta must be positive, got {vartheta}")
    delta = np.asarray(delta, dtype=float)
    lam, g = spec.lam, spec.gamma
    if fam == "L1":
        out = soft_threshold(delta, lam / vartheta)
    elif fam == "WeightedL1":
        out = soft_threshold(delta, np.asarray(weight, dtype=float) * lam / vartheta)
    elif fam == "MCP":
        if not g > 1.0 / vartheta:
            raise InvalidShapeParameter(f"MCP needs gamma > 1/vartheta, got gamma={g}, vartheta={vartheta}")
        out = _mcp_prox(delta, lam, g, vartheta)
    elif fam == "SCAD":
        if not g > 1.0 / vartheta + 1.0:
            raise InvalidShapeParameter(f"SCAD needs gamma > 1/vartheta + 1, got gamma={g}, vartheta={vartheta}")
        out = _scad_prox(delta, lam, g, vartheta)
    elif fam == "TruncatedL1":
        if prev_eta is None:
            raise ValueError("TruncatedL1 needs prev_eta")
        keep = np.abs(np.asarray(prev_eta, dtype=float)) >= spec.tau
        out = np.where(keep, delta, soft_threshold(delta, lam / vartheta))
    else:  # pragma: no cover
        raise InvalidShapeParameter(fam)
    out = np.asarray(out, dtype=float)
    # -0.0 from sign(t)*0 would still compare equal to 0; normalise anyway
    out = out + 0.0
    return out if out.ndim else float(out)
