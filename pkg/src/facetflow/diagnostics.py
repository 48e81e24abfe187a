"""Numerical checks of the a priori estimates and elementary inequalities behind the scheme."""

import math
from dataclasses import asdict, dataclass
from types import SimpleNamespace
from typing import List, NamedTuple, Optional

import numpy as np

from . import grid as gridmod
from .model import grad_psi_tau, mobility_D, mobility_D_tau, psi_tau
from .usolver import gradient_work, p_laplacian, psi_integral

FUZZ_TOLERANCE = 1e-10


@dataclass
class EstimateReport:
    energy_psi: float
    w1p_norm: float
    u_inf: float
    v_inf: float
    v_w1_2p_over_p1: float
    grad_u_sup: float
    h_sup: Optional[float]
    ellipticity_margin: float
    duality_gap: float
    mean_balance: float

    def to_dict(self):
        return asdict(self)


def _magnitude(w):
    return np.hypot(w[..., 0], w[..., 1])


def ellipticity_margin(u, params, grid):
    """Smallest ``lambda_min(D_tau) - (1/(1 + q|grad u|) + tau)`` over the cells."""
    grad = gridmod.gradient(u, grid)
    lam = np.linalg.eigvalsh(mobility_D_tau(grad, params.q, params.tau))[..., 0]
    floor = 1.0 / (1.0 + params.q * _magnitude(grad)) + params.tau
    return float(np.min(lam - floor))


def apriori_report(u, v, h, f, params, grid):
    """Discrete counterparts of the quantities the existence theory bounds."""
    r = 2 * params.p / (params.p + 1)
    lp_part = params.tau * float(np.sum(np.abs(u) ** params.p)) * grid.cell_area
    duality = gridmod.inner(u, v, grid) - (gradient_work(u, params, grid) + lp_part)
    balance = (params.a * gridmod.integrate(u, grid) + params.tau * gridmod.integrate(v, grid)
               - gridmod.integrate(f, grid))
    return EstimateReport(
        energy_psi=psi_integral(u, params, grid),
        w1p_norm=gridmod.w1p_norm(u, params.p, grid),
        u_inf=gridmod.norm_inf(u),
        v_inf=gridmod.norm_inf(v),
        v_w1_2p_over_p1=gridmod.w1p_norm(v, r, grid),
        grad_u_sup=float(np.max(_magnitude(gridmod.gradient(u, grid)))),
        h_sup=None if h is None else float(np.max(_magnitude(h))),
        ellipticity_margin=ellipticity_margin(u, params, grid),
        duality_gap=abs(duality),
        mean_balance=abs(balance),
    )


def surface_energy(u, p, beta, grid):
    """``int |grad u|^p / p + beta |grad u|`` with cell-centred gradients."""
    m = _magnitude(gridmod.gradient(u, grid))
    return float(np.sum(m**p / p + beta * m) * grid.cell_area)


def chemical_potential(u, params, grid):
    """Regularised chemical potential ``-div(rho_tau(|grad u|^2) grad u)``."""
    return p_laplacian(u, params, grid)


# ---------------------------------------------------------------- fuzzing


@dataclass
class FuzzResult:
    samples: int
    seed: int
    max_violation: dict
    tolerance: float = FUZZ_TOLERANCE

    @property
    def passed(self):
        return all(v <= self.tolerance for v in self.max_violation.values())

    def to_dict(self):
        return {"samples": self.samples, "seed": self.seed, "tolerance": self.tolerance,
                "passed": self.passed, "max_violation": dict(self.max_violation)}


def _vectors(rng, n):
    # log-uniform magnitudes in [1e-3, 10], uniform directions
    r = 10.0 ** rng.uniform(-3, 1, n)
    t = rng.uniform(0, 2 * np.pi, n)
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)


def _dot(x, y):
    return np.sum(x * y, axis=-1)


def _sq(x):
    return _dot(x, x)


def _pvec(x, p):
    # |x|^(p-2) x, continuous at 0 for p > 1
    m = np.sqrt(_sq(x))
    scale = np.where(m > 0, np.where(m > 0, m, 1.0) ** (p - 2), 0.0)
    return scale[..., None] * x


def _worst(rhs, lhs):
    return float(max(0.0, np.max(rhs - lhs)))


def inequality_fuzz(sample_count=100_000, seed=42, params=None):
    """Evaluate each pointwise inequality on random samples; report the worst violation.

    ``params`` only fixes ``beta`` for the energy-density checks; everything
    else (gradients, q, tau, p) is drawn at random.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    n = sample_count
    xi, eta, w = _vectors(rng, n), _vectors(rng, n), _vectors(rng, n)
    q = rng.uniform(0, 10, n)
    tau = rng.uniform(0, 1, n)
    tau = np.where(tau > 0, tau, 1.0)
    p_low = rng.uniform(1, 2, n)
    p_low = np.where(p_low > 1, p_low, 2.0)
    p_high = rng.uniform(2, 3, n)
    beta = params.beta if params is not None else 1.0
    out = {}

    ww = _sq(w)
    r = np.sqrt(_sq(xi))
    quad = np.einsum("ni,nij,nj->n", w, mobility_D(xi, q), w)
    out["mobility_ellipticity"] = _worst(ww / (1 + q * r), quad)

    quad_tau = np.einsum("ni,nij,nj->n", w, mobility_D_tau(xi, q, tau), w)
    out["regularized_mobility_ellipticity"] = _worst((1 / (1 + q * r) + tau) * ww, quad_tau)

    d = eta - xi
    a_eta = (_sq(eta) + tau) ** ((p_low - 2) / 2)
    a_xi = (_sq(xi) + tau) ** ((p_low - 2) / 2)
    lhs = _dot(a_eta[:, None] * eta - a_xi[:, None] * xi, d)
    rhs = (p_low - 1) * (1 + _sq(xi) + _sq(eta)) ** ((p_low - 2) / 2) * _sq(d)
    out["regularized_p_monotonicity"] = _worst(rhs, lhs)

    lhs = _dot(eta / np.sqrt(_sq(eta) + tau)[:, None] - xi / np.sqrt(_sq(xi) + tau)[:, None], d)
    out["regularized_unit_monotonicity"] = _worst(0.0, lhs)

    x, y = xi, eta
    lhs = _dot(_pvec(x, p_high) - _pvec(y, p_high), x - y)
    rhs = 2.0 ** (1 - p_high) * np.sqrt(_sq(x - y)) ** p_high
    out["p_monotonicity_p_ge_2"] = _worst(rhs, lhs)

    lhs = (1 + _sq(x) + _sq(y)) ** ((2 - p_low) / 2) * _dot(
        _pvec(x, p_low) - _pvec(y, p_low), x - y)
    rhs = (p_low - 1) * _sq(x - y)
    out["p_monotonicity_p_le_2"] = _worst(rhs, lhs)

    # per-sample parameters broadcast through the model formulas
    batch = SimpleNamespace(p=p_low, beta=beta, tau=tau)
    lhs = _dot(grad_psi_tau(xi, batch) - grad_psi_tau(eta, batch), xi - eta)
    out["grad_psi_monotonicity"] = _worst(0.0, lhs)

    mid = psi_tau(0.5 * (xi + eta), batch)
    avg = 0.5 * (psi_tau(xi, batch) + psi_tau(eta, batch))
    # rounding in Psi itself scales with its size
    out["psi_convexity"] = float(max(0.0, np.max((mid - avg) / np.maximum(1.0, np.abs(avg)))))
    return FuzzResult(samples=n, seed=seed, max_violation=out)


# ---------------------------------------------------------- De Giorgi recursion


@dataclass(frozen=True)
class DeGiorgiParams:
    c: float
    b: float
    alpha: float
    y0: float
    n_max: int = 200

    def __post_init__(self):
        if not (self.c > 0 and self.b > 1 and self.alpha > 0 and self.y0 >= 0 and self.n_max >= 1):
            raise ValueError("need c > 0, b > 1, alpha > 0, y0 >= 0, n_max >= 1")

    @property
    def threshold(self):
        return self.c ** (-1 / self.alpha) * self.b ** (-1 / self.alpha**2)


class DeGiorgiResult(NamedTuple):
    sequence: List[float]
    threshold_pass: bool
    converged: bool
    diverged: bool


_OVERFLOW_LOG = math.log(1e300)


def degiorgi_iterate(dg):
    """Iterate the extremal recursion ``y_{n+1} = c b^n y_n^(1+alpha)``.

    ``converged`` holds when ``y`` drops below 1e-30, or when the whole
    sequence stays under the geometric envelope ``y0 b^(-n/alpha)`` that the
    small-seed condition guarantees. Overflow stops the iteration and is
    reported as divergence.
    """
    seq = [float(dg.y0)]
    diverged = False
    y = float(dg.y0)
    for n in range(dg.n_max):
        if y == 0.0:
            seq.append(0.0)
            continue
        log_next = math.log(dg.c) + n * math.log(dg.b) + (1 + dg.alpha) * math.log(y)
        if log_next > _OVERFLOW_LOG:
            diverged = True
            break
        y = 0.0 if log_next < -745.0 else dg.c * dg.b**n * y ** (1 + dg.alpha)
        seq.append(y)
    threshold_pass = dg.y0 <= dg.threshold
    converged = False
    if not diverged:
        if seq[-1] < 1e-30:
            converged = True
        else:
            envelope = [dg.y0 * dg.b ** (-n / dg.alpha) * (1 + 1e-9) for n in range(len(seq))]
            converged = all(y_n <= e for y_n, e in zip(seq, envelope))
    return DeGiorgiResult(seq, threshold_pass, converged, diverged)


# ------------------------------------------------------ gradient-bound monitor


class MonitorVerdict(NamedTuple):
    verdict: str
    last_change: float
    bounded: bool


def gradient_bound_monitor(per_level, p, rel_tol=0.05):
    """Empirical plateau test for ``sup |grad u_tau|`` along a continuation.

    ``per_level`` is a sequence of ``(tau, grad_u_sup)`` pairs ordered by
    decreasing tau. Returns ``"no claim"`` for ``p <= 4/3``, where no uniform
    gradient bound is expected.
    """
    per_level = list(per_level)
    if len(per_level) < 3:
        raise ValueError("the plateau test needs at least 3 continuation levels")
    sups = np.array([s for _, s in per_level], dtype=float)
    prev, last = sups[-2], sups[-1]
    big = max(prev, last)
    change = 0.0 if big == 0 else abs(last - prev) / big
    bounded = bool(np.max(sups) <= 2 * np.median(sups))
    if p <= 4.0 / 3.0:
        return MonitorVerdict("no claim", change, bounded)
    verdict = "plateau" if change < rel_tol and bounded else "no plateau"
    return MonitorVerdict(verdict, change, bounded)


def energy_band(per_level_energy, factor=2.0):
    """Whether every level energy lies in ``[0, factor * E_first]``."""
    e = np.asarray(per_level_energy, dtype=float)
    return bool(np.all(e >= 0) and np.all(e <= factor * e[0]))
