"""Constructive pipeline for the regularised stationary system

    -div(D_tau(grad u) grad v) + tau v = f - a u
    -div(rho_tau(|grad u|^2) grad u) + tau |u|^(p-2) u = v

with zero-flux boundaries: a damped Picard iteration on v, a continuation
driving tau towards zero, and backward-Euler time stepping built on top.

The Picard map sends v to u (u-solve with right side v) and then to a new v
(v-solve with that u). Its mean mode is violently unstable (gain
``-a / (tau^2 (p-1) |u|^(p-2))``), so the mean is not iterated: integrating
the v-equation gives ``tau mean(v) + a mean(u) = mean(f)`` exactly, and the
u-solve enforces it through a convex penalty on ``mean(u)``. Only the
fluctuation of v is relaxed with the damping weight.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from . import grid as gridmod
from .diagnostics import surface_energy
from .model import in_subgradient, subgradient_select
from .reports import SolveReport
from .usolver import UsolveOptions, psi_integral, solve_u
from .vsolver import VsolveOptions, solve_v

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PicardOptions:
    damping: float = 0.7
    tol_fp: float = 1e-8
    max_picard: int = 200

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if not self.tol_fp > 0:
            raise ValueError("tol_fp must be > 0")
        if self.max_picard < 1:
            raise ValueError("max_picard must be >= 1")


@dataclass(frozen=True)
class TauSchedule:
    tau0: float = 1.0
    ratio: float = 0.5
    tau_min: float = 1e-6

    def __post_init__(self):
        if not 0 < self.tau0 <= 1:
            raise ValueError("tau0 must lie in (0, 1]")
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        if not 0 < self.tau_min <= self.tau0:
            raise ValueError("tau_min must lie in (0, tau0]")

    def levels(self):
        """Geometric sequence from ``tau0`` down to ``tau_min`` (always included)."""
        taus = []
        tau = self.tau0
        while tau > self.tau_min * (1 + 1e-12):
            taus.append(tau)
            tau *= self.ratio
        taus.append(self.tau_min)
        return taus


@dataclass
class SolverOptions:
    """Bundle of the three option sets a stationary solve needs."""

    picard: PicardOptions = field(default_factory=PicardOptions)
    usolve: UsolveOptions = field(default_factory=UsolveOptions)
    vsolve: VsolveOptions = field(default_factory=VsolveOptions)


@dataclass
class PicardReport:
    iterations: int = 0
    update_history: List[float] = field(default_factory=list)
    converged: bool = False
    message: str = ""
    sub_reports: List[SolveReport] = field(default_factory=list)

    def summary(self):
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_update": self.update_history[-1] if self.update_history else None,
            "u_newton_iterations": sum(r.iterations for r in self.sub_reports if r.stage == "u"),
            "v_cg_iterations": sum(r.iterations for r in self.sub_reports if r.stage == "v"),
            "message": self.message,
        }


@dataclass
class StationarySolution:
    u: np.ndarray
    v: np.ndarray
    h: np.ndarray
    tau_final: float
    reports: List[PicardReport]
    levels: List[dict]
    converged: bool
    message: str = ""

    def membership_fraction(self, grid, tol=None):
        tol = max(1e-6, np.sqrt(self.tau_final)) if tol is None else tol
        grad = gridmod.gradient(self.u, grid)
        return float(np.mean(in_subgradient(self.h, grad, tol)))


def _mean(w, grid):
    return gridmod.integrate(w, grid) / grid.measure


def picard_step(v_in, f, params, grid, opts=None, u_guess=None):
    """One application of the damped Picard map.

    Returns ``(v_out, u, reports)``; ``reports`` holds the u- and v-solve
    reports. With ``damping == 1`` the output is the undamped map.
    """
    opts = opts or SolverOptions()
    sigma = opts.picard.damping
    fluct_in = v_in - _mean(v_in, grid)
    g = fluct_in + _mean(f, grid) / params.tau
    u, rep_u = solve_u(g, params, grid, opts.usolve, u0=u_guess,
                       mean_penalty=params.a / params.tau)
    v_raw, rep_v = solve_v(u, f, params, grid, opts.vsolve, v0=v_in)
    mean_raw = _mean(v_raw, grid)
    v_out = (1 - sigma) * fluct_in + sigma * (v_raw - mean_raw) + mean_raw
    return v_out, u, [rep_u, rep_v]


def solve_stationary(f, params, grid, opts=None, v0=None, u0=None):
    """Iterate :func:`picard_step` at fixed tau until the relative update drops below ``tol_fp``.

    Returns ``(u, v, report)``. On failure the last iterate is returned with
    ``report.converged`` false and the full update history.
    """
    opts = opts or SolverOptions()
    f = np.asarray(f, dtype=float)
    v = np.zeros(grid.shape) if v0 is None else np.array(v0, dtype=float)
    u = u0
    report = PicardReport()
    for _ in range(opts.picard.max_picard):
        v_new, u, subs = picard_step(v, f, params, grid, opts, u_guess=u)
        report.sub_reports.extend(subs)
        report.iterations += 1
        failed = [r for r in subs if not r.converged]
        if failed:
            report.message = f"{failed[0].stage}-solve failed: {failed[0].message}"
            return u, v_new, report
        update = gridmod.norm_lp(v_new - v, 2, grid) / max(gridmod.norm_lp(v, 2, grid), 1.0)
        report.update_history.append(update)
        v = v_new
        if update <= opts.picard.tol_fp:
            report.converged = True
            return u, v, report
    report.message = f"no fixed point after {opts.picard.max_picard} Picard iterations"
    logger.warning(report.message)
    return u, v, report


def level_diagnostics(u, v, params, grid):
    """Per-level quantities tracked along the continuation."""
    grad = gridmod.gradient(u, grid)
    h = subgradient_select(grad, params.tau)
    return {
        "tau": params.tau,
        "energy_psi": psi_integral(u, params, grid),
        "w1p_norm": gridmod.w1p_norm(u, params.p, grid),
        "u_inf": gridmod.norm_inf(u),
        "v_inf": gridmod.norm_inf(v),
        "grad_u_sup": float(np.max(np.hypot(grad[..., 0], grad[..., 1]))),
        "h_sup": float(np.max(np.hypot(h[..., 0], h[..., 1]))),
    }


def continuation_solve(f, params, grid, schedule=None, opts=None, u0=None, v0=None):
    """Solve along a decreasing tau schedule with warm starts and extract ``h`` at the end."""
    schedule = schedule or TauSchedule()
    opts = opts or SolverOptions()
    u, v = u0, v0
    reports, levels = [], []
    converged, message = True, ""
    tau = schedule.tau0
    for tau in schedule.levels():
        level_params = params.with_tau(tau)
        u, v, rep = solve_stationary(f, level_params, grid, opts, v0=v, u0=u)
        reports.append(rep)
        levels.append(level_diagnostics(u, v, level_params, grid))
        if not rep.converged:
            converged = False
            message = f"tau={tau:.3e}: {rep.message}"
            break
    h = subgradient_select(gridmod.gradient(u, grid), tau)
    return StationarySolution(u=u, v=v, h=h, tau_final=tau, reports=reports,
                              levels=levels, converged=converged, message=message)


@dataclass
class Trajectory:
    steps: List[StationarySolution]
    surface_energy: List[float]
    converged: bool
    message: str = ""


def evolve(u0, params, grid, delta, nsteps, schedule=None, opts=None, f_ext=None):
    """Backward-Euler steps: each step solves the stationary system with ``a = 1/delta``, ``f = u_prev/delta``."""
    if not delta > 0:
        raise ValueError("delta must be > 0")
    if nsteps < 1:
        raise ValueError("nsteps must be >= 1")
    step_params = replace(params, a=1.0 / delta, delta=float(delta))
    u_prev = np.asarray(u0, dtype=float)
    energies = [surface_energy(u_prev, params.p, params.beta, grid)]
    steps = []
    v_prev = None
    for k in range(nsteps):
        f = u_prev / delta if f_ext is None else u_prev / delta + f_ext
        sol = continuation_solve(f, step_params, grid, schedule, opts, u0=u_prev, v0=v_prev)
        steps.append(sol)
        if not sol.converged:
            return Trajectory(steps, energies, False, f"step {k + 1}: {sol.message}")
        u_prev, v_prev = sol.u, sol.v
        energies.append(surface_energy(u_prev, params.p, params.beta, grid))
    return Trajectory(steps, energies, True)
