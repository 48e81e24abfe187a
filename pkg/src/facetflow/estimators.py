"""Estimator-style wrappers around the functional solvers.

``X`` is always a single scalar field of shape ``(ny, nx)``: the data ``f``
for :class:`FacetSolver`, the initial surface for :class:`FacetEvolution`.
``fit`` runs the solve and stores the result in trailing-underscore
attributes; ``transform`` solves again for new data, warm-started from the
fitted state, and returns the surface height.
"""

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_array, check_is_fitted

from .grid import Grid, gradient
from .model import ModelParams, subgradient_select
from .scheme import (PicardOptions, SolverOptions, TauSchedule, continuation_solve, evolve,
                     solve_stationary)


def check_field(X, shape=None):
    """Validate a scalar field: 2-D, finite, at least 4 cells per axis, optional exact shape."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_min_samples=4,
                    ensure_min_features=4, copy=True)
    if shape is not None and X.shape != tuple(shape):
        raise ValueError(f"field has shape {X.shape}, expected {tuple(shape)}")
    return X


class _GridMixin:
    def _grid(self, X):
        ny, nx = X.shape
        return Grid(nx, ny, self.lx, self.ly)

    def _solver_options(self):
        return SolverOptions(picard=PicardOptions(self.damping, self.tol_fp, self.max_picard))


class FacetSolver(_GridMixin, TransformerMixin, BaseEstimator):
    """Stationary solve for data ``f``, optionally reached by tau-continuation.

    With ``continuation=True`` tau runs geometrically from ``tau0`` down to
    ``tau``; otherwise a single solve at ``tau`` is performed.
    """

    def __init__(self, p=1.5, beta=1.0, q=0.0, a=1.0, tau=1e-6, continuation=True, tau0=1.0,
                 ratio=0.5, damping=0.7, tol_fp=1e-8, max_picard=200, lx=1.0, ly=1.0):
        self.p = p
        self.beta = beta
        self.q = q
        self.a = a
        self.tau = tau
        self.continuation = continuation
        self.tau0 = tau0
        self.ratio = ratio
        self.damping = damping
        self.tol_fp = tol_fp
        self.max_picard = max_picard
        self.lx = lx
        self.ly = ly

    def _solve(self, f, grid, u0=None, v0=None):
        params = ModelParams(self.p, self.beta, self.q, self.a, self.tau)
        opts = self._solver_options()
        if self.continuation:
            schedule = TauSchedule(max(self.tau0, self.tau), self.ratio, self.tau)
            sol = continuation_solve(f, params, grid, schedule, opts, u0=u0, v0=v0)
            return sol.u, sol.v, sol.h, sol.converged, sol.message, sol.levels
        u, v, rep = solve_stationary(f, params, grid, opts, v0=v0, u0=u0)
        h = subgradient_select(gradient(u, grid), self.tau)
        return u, v, h, rep.converged, rep.message, []

    def fit(self, X, y=None):
        f = check_field(X)
        self.grid_ = self._grid(f)
        u, v, h, ok, msg, levels = self._solve(f, self.grid_)
        self.u_, self.v_, self.h_ = u, v, h
        self.converged_, self.levels_ = ok, levels
        if not ok:
            warnings.warn(f"stationary solve did not converge: {msg}", ConvergenceWarning)
        return self

    def transform(self, X):
        check_is_fitted(self, "u_")
        f = check_field(X, self.grid_.shape)
        u, *_ = self._solve(f, self.grid_, u0=self.u_, v0=self.v_)
        return u


class FacetEvolution(_GridMixin, TransformerMixin, BaseEstimator):
    """Backward-Euler relaxation of an initial surface over ``nsteps`` steps of size ``delta``."""

    def __init__(self, p=1.5, beta=1.0, q=0.0, delta=0.01, nsteps=1, tau0=1.0, ratio=0.5,
                 tau_min=1e-6, damping=0.7, tol_fp=1e-8, max_picard=200, lx=1.0, ly=1.0):
        self.p = p
        self.beta = beta
        self.q = q
        self.delta = delta
        self.nsteps = nsteps
        self.tau0 = tau0
        self.ratio = ratio
        self.tau_min = tau_min
        self.damping = damping
        self.tol_fp = tol_fp
        self.max_picard = max_picard
        self.lx = lx
        self.ly = ly

    def _run(self, u0, grid):
        params = ModelParams(self.p, self.beta, self.q)
        schedule = TauSchedule(self.tau0, self.ratio, self.tau_min)
        traj = evolve(u0, params, grid, self.delta, self.nsteps, schedule, self._solver_options())
        if not traj.converged:
            warnings.warn(f"evolution stopped early: {traj.message}", ConvergenceWarning)
        return traj

    def fit(self, X, y=None):
        u0 = check_field(X)
        self.grid_ = self._grid(u0)
        self.trajectory_ = self._run(u0, self.grid_)
        self.surface_energy_ = np.asarray(self.trajectory_.surface_energy)
        self.u_ = self.trajectory_.steps[-1].u
        return self

    def transform(self, X):
        check_is_fitted(self, "u_")
        u0 = check_field(X, self.grid_.shape)
        return self._run(u0, self.grid_).steps[-1].u
