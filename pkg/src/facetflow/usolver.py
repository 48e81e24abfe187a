"""u-subproblem: ``-div(rho_tau(|grad u|^2) grad u) + tau |u|^(p-2) u = g``, zero flux.

The equation is the Euler-Lagrange equation of a strictly convex energy, so
it is solved by minimisation: damped Newton with Armijo backtracking and a
steepest-descent fallback. The discrete energy integrates ``Psi_tau`` with the
corner gradients of :mod:`facetflow.grid`, which makes the residual below its
exact gradient (per unit cell area).
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import grid as gridmod
from .model import hess_psi_tau, psi_tau, rho_tau
from .reports import SolveReport

logger = logging.getLogger(__name__)

ZERO_SMOOTHING = 1e-12


@dataclass(frozen=True)
class UsolveOptions:
    tol_residual: float = 1e-10
    max_newton: int = 100
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    min_step: float = 1e-12
    polish: bool = True

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be > 0")
        if self.max_newton < 1:
            raise ValueError("max_newton must be >= 1")
        if not 0 < self.armijo_c < 1 or not 0 < self.armijo_shrink < 1:
            raise ValueError("Armijo constants must lie in (0, 1)")


def _signed_power(u, e):
    return np.sign(u) * np.abs(u) ** e


def psi_integral(u, params, grid):
    """Corner quadrature of ``int Psi_tau(grad u)``."""
    g = gridmod.corner_gradients(u, grid)
    return float(0.25 * np.sum(psi_tau(g, params)) * grid.cell_area)


def gradient_work(u, params, grid):
    """Corner quadrature of ``int rho_tau(|grad u|^2) |grad u|^2``."""
    g = gridmod.corner_gradients(u, grid)
    s = g[..., 0] ** 2 + g[..., 1] ** 2
    return float(0.25 * np.sum(rho_tau(s, params) * s) * grid.cell_area)


def p_laplacian(u, params, grid):
    """``-div(rho_tau(|grad u|^2) grad u)`` with the coefficient sampled per corner."""
    g = gridmod.corner_gradients(u, grid)
    coef = rho_tau(g[..., 0] ** 2 + g[..., 1] ** 2, params)
    return -gridmod.isotropic_corner_divergence(coef, u, grid)


def energy_u(u, g, params, grid, mean_penalty=0.0):
    """Discrete ``int Psi_tau(grad u) + tau/p |u|^p - g u``.

    ``mean_penalty`` adds ``(kappa/2) |Omega| mean(u)^2``; the stationary
    scheme uses it to solve for the mean of u implicitly.
    """
    e = psi_integral(u, params, grid)
    e += params.tau / params.p * float(np.sum(np.abs(u) ** params.p)) * grid.cell_area
    e -= gridmod.inner(g, u, grid)
    if mean_penalty:
        e += 0.5 * mean_penalty * grid.measure * (gridmod.integrate(u, grid) / grid.measure) ** 2
    return e


def residual_u(u, g, params, grid, mean_penalty=0.0):
    r = p_laplacian(u, params, grid) + params.tau * _signed_power(u, params.p - 1) - g
    if mean_penalty:
        r = r + mean_penalty * gridmod.integrate(u, grid) / grid.measure
    return r


def _hessian(u, params, grid, diffs):
    g = gridmod.corner_gradients(u, grid)
    H = gridmod.assemble_flux_matrix(hess_psi_tau(g, params), grid, diffs)
    zeroth = params.tau * (params.p - 1) * (u**2 + ZERO_SMOOTHING) ** ((params.p - 2) / 2)
    return (H + sp.diags(zeroth.ravel())).tocsc()


def _newton_direction(H, rhs, rank_one):
    lu = splu(H)
    d = lu.solve(rhs)
    if rank_one:
        # Sherman-Morrison for H + w 1 1^T
        ones = np.ones_like(rhs)
        z = lu.solve(ones)
        d = d - rank_one * d.sum() / (1.0 + rank_one * z.sum()) * z
    return d


def _is_positive(H, rank_one, rng):
    x = rng.standard_normal(H.shape[0])
    return float(x @ (H @ x) + rank_one * x.sum() ** 2) > 0


def solve_u(g, params, grid, opts=None, u0=None, mean_penalty=0.0):
    """Minimise the u-energy for right-hand side ``g``.

    Returns ``(u, report)``. Convergence means
    ``||residual||_2 / max(||g||_2, 1) <= opts.tol_residual``; running out of
    Newton iterations returns the last iterate with ``report.converged`` false.
    """
    opts = opts or UsolveOptions()
    g = np.asarray(g, dtype=float)
    u = np.zeros(grid.shape) if u0 is None else np.array(u0, dtype=float)
    report = SolveReport(stage="u")
    scale = max(gridmod.norm_lp(g, 2, grid), 1.0)
    area = grid.cell_area
    rank_one = mean_penalty * area / grid.measure
    diffs = gridmod.difference_matrices(grid)
    rng = np.random.default_rng(0)

    energy = energy_u(u, g, params, grid, mean_penalty)
    report.energy_history.append(energy)
    for it in range(opts.max_newton + 1):
        r = residual_u(u, g, params, grid, mean_penalty)
        res = gridmod.norm_lp(r, 2, grid) / scale
        report.residual_history.append(res)
        if res <= opts.tol_residual:
            report.converged = True
            if opts.polish:
                u, energy = _polish(u, r, energy, g, params, grid, diffs, rank_one, mean_penalty,
                                    scale, report)
            break
        if it == opts.max_newton:
            break
        H = _hessian(u, params, grid, diffs)
        report.hessian_checks.append(_is_positive(H, rank_one, rng))
        d = _newton_direction(H, -r.ravel(), rank_one).reshape(grid.shape)
        step = _line_search(u, d, r, energy, g, params, grid, opts, mean_penalty)
        if step is None:
            report.fallback_steps += 1
            step = _line_search(u, -r, r, energy, g, params, grid, opts, mean_penalty)
        if step is None:
            report.message = "line search failed in both Newton and gradient directions"
            break
        u, energy = step
        report.iterations += 1
        report.energy_history.append(energy)

    report.energy_final = energy
    if not report.converged and not report.message:
        report.message = f"no convergence after {opts.max_newton} Newton iterations"
    if not report.converged:
        logger.warning("u-solve failed: %s (residual %.3e)", report.message, report.final_residual)
    return u, report


def _polish(u, r, energy, g, params, grid, diffs, rank_one, mean_penalty, scale, report):
    # One full Newton step past the stopping test, kept only if it does not
    # raise the residual: Newton's local quadratic rate takes the iterate to
    # roundoff level for the price of one extra factorisation.
    H = _hessian(u, params, grid, diffs)
    trial = u + _newton_direction(H, -r.ravel(), rank_one).reshape(grid.shape)
    res_old = gridmod.norm_lp(r, 2, grid) / scale
    res_new = gridmod.norm_lp(residual_u(trial, g, params, grid, mean_penalty), 2, grid) / scale
    if not res_new <= res_old:
        return u, energy
    report.residual_history.append(res_new)
    return trial, energy_u(trial, g, params, grid, mean_penalty)


def _line_search(u, d, r, energy, g, params, grid, opts, mean_penalty):
    slope = float(np.sum(r * d)) * grid.cell_area
    if not slope < 0:
        return None
    # energies near the minimiser differ by less than rounding; allow for it
    slack = 64 * np.finfo(float).eps * (abs(energy) + abs(gridmod.inner(g, u, grid)))
    alpha = 1.0
    while alpha >= opts.min_step:
        trial = u + alpha * d
        e = energy_u(trial, g, params, grid, mean_penalty)
        if e <= energy + opts.armijo_c * alpha * slope + slack:
            return trial, e
        alpha *= opts.armijo_shrink
    return None
