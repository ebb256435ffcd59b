"""Closed-form proximal mappings, Moreau envelopes and Clarke Jacobian
diagonals for the weighted l1 norm and the averaged check loss.

Throughout, ``gamma`` is the quadratic coefficient: the maps solve

    prox_weighted_l1:  argmin_t  omega_i |t| + (gamma/2)(t - z_i)^2
    prox_check_loss:   argmin_t  (1/n) theta_tau(t) + (gamma/2)(t - z_i)^2

componentwise, with theta_tau(u) = (tau - 1{u<=0}) u.
"""

import numpy as np
from dataclasses import dataclass

TIE_RULES = ("zero", "one")


@dataclass(frozen=True)
class ProxJacobianElement:
    """Diagonal of one selected Clarke Jacobian element; entries in [0, 1]."""

    diag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        if d.size and (d.min() < 0.0 or d.max() > 1.0):
            raise ValueError("Jacobian diagonal entries must lie in [0,1]")
        object.__setattr__(self, "diag", d)


def prox_weighted_l1(z, omega, gamma):
    """Soft threshold with per-component threshold omega_i / gamma."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    z = np.asarray(z, dtype=float)
    thr = np.asarray(omega, dtype=float) / gamma
    return np.sign(z) * np.maximum(np.abs(z) - thr, 0.0)


def prox_check_loss(z, gamma, tau, n):
    """Two-sided shrinkage with kinks tau/(n gamma) and (tau-1)/(n gamma).

    Returns z - tau/(n gamma) above the upper kink, z - (tau-1)/(n gamma)
    below the lower kink, and 0 in the dead zone between them.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must be in (0,1)")
    z = np.asarray(z, dtype=float)
    hi = tau / (n * gamma)
    lo = (tau - 1.0) / (n * gamma)
    return np.where(z > hi, z - hi, np.where(z < lo, z - lo, 0.0))


def moreau_env_weighted_l1(z, omega, gamma):
    """Envelope value min_t  sum_i omega_i|t_i| + (gamma/2)||t - z||^2."""
    p = prox_weighted_l1(z, omega, gamma)
    omega = np.asarray(omega, dtype=float)
    return float(np.sum(omega * np.abs(p)) + 0.5 * gamma * np.sum((p - np.asarray(z, float)) ** 2))


def moreau_env_check_loss(z, gamma, tau, n):
    """Envelope value min_t  (1/n) sum_i theta_tau(t_i) + (gamma/2)||t - z||^2."""
    z = np.asarray(z, dtype=float)
    p = prox_check_loss(z, gamma, tau, n)
    loss = np.sum((tau - (p <= 0)) * p) / n
    return float(loss + 0.5 * gamma * np.sum((p - z) ** 2))


def _tie_value(tie_rule):
    if tie_rule not in TIE_RULES:
        raise ValueError(f"tie_rule must be one of {TIE_RULES}")
    return 0.0 if tie_rule == "zero" else 1.0


def clarke_jacobian_check_loss_prox(z, gamma, tau, n, tie_rule="zero"):
    """Diagonal element of the Clarke Jacobian of prox_check_loss at z.

    Entry 1 strictly outside the kinks, 0 strictly inside, tie_rule at a kink.
    """
    tie = _tie_value(tie_rule)
    z = np.asarray(z, dtype=float)
    hi = tau / (n * gamma)
    lo = (tau - 1.0) / (n * gamma)
    diag = np.where((z > hi) | (z < lo), 1.0, np.where((z == hi) | (z == lo), tie, 0.0))
    return ProxJacobianElement(diag=diag)


def clarke_jacobian_weighted_l1_prox(z, omega, gamma, tie_rule="zero"):
    """Diagonal element of the Clarke Jacobian of prox_weighted_l1 at z.

    Entry 1 where |gamma z_i| > omega_i, 0 where strictly below, tie_rule at
    the kink |gamma z_i| = omega_i.
    """
    tie = _tie_value(tie_rule)
    z = np.asarray(z, dtype=float)
    omega = np.asarray(omega, dtype=float)
    mag = np.abs(gamma * z)
    diag = np.where(mag > omega, 1.0, np.where(mag == omega, tie, 0.0))
    return ProxJacobianElement(diag=diag)
