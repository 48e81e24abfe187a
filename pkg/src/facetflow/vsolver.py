"""Linear v-subproblem ``-div(D_tau(grad u) grad v) + tau v = f - a u`` with zero flux."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import grid as gridmod
from .model import mobility_D_tau
from .reports import SolveReport

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VsolveOptions:
    tol: float = 1e-11
    max_cg: Optional[int] = None
    preconditioner: str = "diagonal"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.preconditioner not in ("none", "diagonal"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if self.max_cg is not None and self.max_cg < 1:
            raise ValueError("max_cg must be >= 1")

    def cg_cap(self, grid):
        return self.max_cg if self.max_cg is not None else 10 * (grid.nx + grid.ny)


class VOperator:
    """Matrix-free ``v -> -div(K grad v) + tau v`` for a per-cell mobility field ``K``."""

    def __init__(self, coef, tau, grid):
        self.coef = coef
        self.tau = tau
        self.grid = grid

    def __call__(self, v):
        return -gridmod.flux_divergence(self.coef, v, self.grid) + self.tau * v

    def matvec(self, x):
        return self(x.reshape(self.grid.shape)).ravel()

    def to_sparse(self):
        n = self.grid.size
        return (gridmod.assemble_flux_matrix(self.coef, self.grid) + self.tau * sp.identity(n)).tocsr()

    def to_dense(self):
        return self.to_sparse().toarray()

    def diagonal(self):
        return self.to_sparse().diagonal().reshape(self.grid.shape)

    def face_coefficients(self):
        """Largest magnitude of any tensor entry entering a face flux."""
        return float(np.max(np.abs(self.coef)))


def assemble_v_operator(u, params, grid):
    coef = mobility_D_tau(gridmod.gradient(u, grid), params.q, params.tau)
    return VOperator(coef, params.tau, grid)


def pcg(op, b, x0=None, tol=1e-11, maxiter=1000, precond="diagonal", stage="v"):
    """Preconditioned conjugate gradients on fields; stops on ``||r|| <= tol ||b||``."""
    report = SolveReport(stage=stage)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        report.converged = True
        report.residual_history.append(0.0)
        return np.zeros_like(b), report
    inv_diag = 1.0 / op.diagonal() if precond == "diagonal" else None
    r = b - op(x)
    z = r * inv_diag if inv_diag is not None else r
    d = z.copy()
    rz = float(np.sum(r * z))
    for _ in range(maxiter + 1):
        res = float(np.linalg.norm(r)) / bnorm
        report.residual_history.append(res)
        if res <= tol:
            report.converged = True
            break
        if report.iterations == maxiter:
            break
        Ad = op(d)
        dAd = float(np.sum(d * Ad))
        if not dAd > 0:
            report.message = "operator lost positive definiteness"
            break
        alpha = rz / dAd
        x += alpha * d
        r -= alpha * Ad
        z = r * inv_diag if inv_diag is not None else r
        rz_new = float(np.sum(r * z))
        d = z + (rz_new / rz) * d
        rz = rz_new
        report.iterations += 1
    if not report.converged:
        report.message = report.message or f"CG stagnated after {report.iterations} iterations"
        logger.warning("v-solve failed: %s (residual %.3e)", report.message, report.final_residual)
    return x, report


def solve_v(u, f, params, grid, opts=None, v0=None):
    """Solve for v given the height ``u`` and data ``f``. Returns ``(v, report)``."""
    opts = opts or VsolveOptions()
    op = assemble_v_operator(u, params, grid)
    rhs = np.asarray(f, dtype=float) - params.a * u
    v, report = pcg(op, rhs, v0, opts.tol, opts.cg_cap(grid), opts.preconditioner)
    # The operator maps constants to tau * constants, so a uniform shift
    # removes the mean of the residual exactly: the integrated equation
    # tau * int v = int (f - a u) then holds to roundoff.
    v = v + np.mean(rhs - op(v)) / params.tau
    return v, report


def check_v_maximum_bound(v, u, f, params):
    """Margin ``||f - a u||_inf / tau - ||v||_inf``; non-negative when the bound holds."""
    return float(np.max(np.abs(f - params.a * u)) / params.tau - np.max(np.abs(v)))
