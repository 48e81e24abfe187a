"""Pointwise closed-form quantities of the crystal-surface model.

Every function is vectorised: a gradient argument ``xi`` is an array whose
last axis has length 2, a tensor result has trailing shape ``(2, 2)``.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Scalar model constants.

    Parameters
    ----------
    p : float
        Exponent of the p-Laplacian part of the surface energy.
    beta : float
        Weight of the facet (1-Laplacian) energy.
    q : float
        Slope of the mobility degeneracy ``1 / (1 + q |grad u|)``.
    a : float
        Zeroth-order coefficient of the v-equation (``1/delta`` when evolving).
    tau : float
        Regularisation parameter in (0, 1].
    delta : float, optional
        Time step, only meaningful for evolution runs.
    relaxed : bool
        Allow ``p > 2``. Off by default since existence is only known for
        ``1 < p <= 2``.
    """

    p: float
    beta: float
    q: float = 0.0
    a: float = 1.0
    tau: float = 1.0
    delta: Optional[float] = None
    relaxed: bool = False

    def __post_init__(self):
        errors = validate_params(self)
        if errors:
            raise ValueError("; ".join(errors))

    def with_tau(self, tau):
        return replace(self, tau=float(tau))


def validate_params(params):
    """Return the list of every violated constraint (empty when valid)."""
    errors = []
    p = params.p
    if not np.isfinite(p) or p <= 1:
        errors.append(f"p must satisfy p > 1 (got {p})")
    elif p > 2 and not params.relaxed:
        errors.append(f"p must satisfy p <= 2 unless relaxed mode is enabled (got {p})")
    if not params.beta > 0:
        errors.append(f"beta must be > 0 (got {params.beta})")
    if not params.q >= 0:
        errors.append(f"q must be >= 0 (got {params.q})")
    if not params.a > 0:
        errors.append(f"a must be > 0 (got {params.a})")
    if not 0 < params.tau <= 1:
        errors.append(f"tau must lie in (0, 1] (got {params.tau})")
    if params.delta is not None and not params.delta > 0:
        errors.append(f"delta must be > 0 (got {params.delta})")
    return errors


def _sq(xi):
    xi = np.asarray(xi, dtype=float)
    return xi[..., 0] ** 2 + xi[..., 1] ** 2


def rho(s, params):
    """Unregularised coefficient ``s^((p-2)/2) + beta s^(-1/2)``; needs ``s > 0``."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("rho is singular at s = 0; use rho_tau")
    return s ** ((params.p - 2) / 2) + params.beta / np.sqrt(s)


def rho_tau(s, params):
    s = np.asarray(s, dtype=float) + params.tau
    return s ** ((params.p - 2) / 2) + params.beta / np.sqrt(s)


def rho_tau_prime(s, params):
    """Derivative of :func:`rho_tau` with respect to ``s``."""
    s = np.asarray(s, dtype=float) + params.tau
    return 0.5 * (params.p - 2) * s ** ((params.p - 4) / 2) - 0.5 * params.beta * s ** -1.5


def psi_tau(xi, params):
    """Regularised convex energy density of a gradient."""
    s = _sq(xi) + params.tau
    return s ** (params.p / 2) / params.p + params.beta * np.sqrt(s)


def grad_psi_tau(xi, params):
    xi = np.asarray(xi, dtype=float)
    return rho_tau(_sq(xi), params)[..., None] * xi


def hess_psi_tau(xi, params):
    """Hessian of :func:`psi_tau`: ``rho I + 2 rho' xi xi^T``."""
    xi = np.asarray(xi, dtype=float)
    s = _sq(xi)
    r = rho_tau(s, params)[..., None, None]
    dr = rho_tau_prime(s, params)[..., None, None]
    outer = xi[..., :, None] * xi[..., None, :]
    return r * np.eye(2) + 2.0 * dr * outer


def _mobility(xi, q, tau):
    xi = np.asarray(xi, dtype=float)
    s = _sq(xi)
    r = np.sqrt(s)
    # (1/(1+q r) - 1) / (s + tau), rewritten so that r = 0 is harmless
    denom = s + tau
    safe = np.where(denom > 0, denom, 1.0)
    c = np.where(denom > 0, -q * r / ((1.0 + q * r) * safe), 0.0)
    out = np.empty(xi.shape[:-1] + (2, 2))
    out[..., 0, 0] = 1.0 + tau + c * xi[..., 0] ** 2
    out[..., 1, 1] = 1.0 + tau + c * xi[..., 1] ** 2
    out[..., 0, 1] = out[..., 1, 0] = c * xi[..., 0] * xi[..., 1]
    return out


def mobility_D(xi, q):
    """Mobility tensor ``S Lambda S^T``; the identity where the gradient vanishes."""
    return _mobility(xi, q, 0.0)


def mobility_D_tau(xi, q, tau):
    """Regularised mobility; equals ``(1 + tau) I`` on facets."""
    return _mobility(xi, q, tau)


def s_lambda_factor(xi, q):
    """Rotation ``S`` and eigenvalue matrix ``Lambda`` with ``D = S Lambda S^T``."""
    xi = np.asarray(xi, dtype=float)
    r = np.sqrt(_sq(xi))
    if np.any(r == 0):
        raise ValueError("S is undefined where the gradient vanishes (D = I there)")
    ux = xi[..., 0] / r
    uy = xi[..., 1] / r
    S = np.empty(xi.shape[:-1] + (2, 2))
    S[..., 0, 0] = ux
    S[..., 0, 1] = -uy
    S[..., 1, 0] = uy
    S[..., 1, 1] = ux
    Lam = np.zeros_like(S)
    Lam[..., 0, 0] = 1.0 / (1.0 + q * r)
    Lam[..., 1, 1] = 1.0
    return S, Lam


def subgradient_select(xi, tau):
    """Regularised selection ``xi / sqrt(|xi|^2 + tau)``; magnitude below one."""
    xi = np.asarray(xi, dtype=float)
    return xi / np.sqrt(_sq(xi) + tau)[..., None]


def in_subgradient(h, xi, tol=1e-8):
    """Whether ``h`` belongs to the subdifferential of ``|.|`` at ``xi``, up to ``tol``."""
    h = np.asarray(h, dtype=float)
    xi = np.asarray(xi, dtype=float)
    r = np.sqrt(_sq(xi))
    unit = xi / np.where(r > tol, r, 1.0)[..., None]
    off_facet = (r > tol) & (np.sqrt(_sq(h - unit)) <= tol)
    on_facet = (r <= tol) & (np.sqrt(_sq(h)) <= 1.0 + tol)
    return off_facet | on_facet
