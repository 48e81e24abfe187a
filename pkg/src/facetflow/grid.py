"""Uniform cell-centred grid on a rectangle with homogeneous Neumann boundaries.

Fields are plain numpy arrays: scalar fields have shape ``(ny, nx)`` (row
index is y), vector fields ``(ny, nx, 2)`` and tensor fields ``(ny, nx, 2, 2)``.

The diffusion operator is built from *corner gradients*: each cell carries
four one-sided gradients, one per corner, formed from the two faces that meet
there (a boundary face contributes a zero normal difference). The discrete
form ``sum_cells sum_corners (area/4) g^T K g`` is symmetric and positive
semidefinite whenever ``K`` is, reduces to the 5-point Laplacian for
``K = I``, and its divergence is written as face fluxes that vanish on the
boundary.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

MAX_CELLS = 2**22

# corner order: (sx, sy) = (+,+), (+,-), (-,+), (-,-)
_XPLUS = (0, 1)
_XMINUS = (2, 3)
_YPLUS = (0, 2)
_YMINUS = (1, 3)


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0
    max_cells: int = MAX_CELLS

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs at least 4 cells per axis (got {self.nx}x{self.ny})")
        if self.nx * self.ny > self.max_cells:
            raise ValueError(f"grid has {self.nx * self.ny} cells, above the cap {self.max_cells}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain side lengths must be positive")

    @property
    def hx(self):
        return self.lx / self.nx

    @property
    def hy(self):
        return self.ly / self.ny

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def size(self):
        return self.nx * self.ny

    @property
    def cell_area(self):
        return self.hx * self.hy

    @property
    def measure(self):
        return self.lx * self.ly

    def cell_centers(self):
        """Return ``(X, Y)`` coordinate arrays of shape ``(ny, nx)``."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y)

    def zeros(self):
        return np.zeros(self.shape)

    def full(self, value):
        return np.full(self.shape, float(value))


def gradient(u, grid):
    """Central differences, with mirrored ghost cells so the normal derivative vanishes."""
    up = np.pad(u, 1, mode="edge")
    g = np.empty(u.shape + (2,))
    g[..., 0] = (up[1:-1, 2:] - up[1:-1, :-2]) / (2.0 * grid.hx)
    g[..., 1] = (up[2:, 1:-1] - up[:-2, 1:-1]) / (2.0 * grid.hy)
    return g


def corner_gradients(u, grid):
    """One-sided gradients at the four corners of every cell, shape ``(4, ny, nx, 2)``."""
    dx = np.diff(u, axis=1) / grid.hx
    dy = np.diff(u, axis=0) / grid.hy
    xp = np.zeros(u.shape)
    xm = np.zeros(u.shape)
    yp = np.zeros(u.shape)
    ym = np.zeros(u.shape)
    xp[:, :-1] = dx
    xm[:, 1:] = dx
    yp[:-1, :] = dy
    ym[1:, :] = dy
    g = np.empty((4,) + u.shape + (2,))
    g[0, ..., 0], g[0, ..., 1] = xp, yp
    g[1, ..., 0], g[1, ..., 1] = xp, ym
    g[2, ..., 0], g[2, ..., 1] = xm, yp
    g[3, ..., 0], g[3, ..., 1] = xm, ym
    return g


def face_fluxes(K, v, grid):
    """Face fluxes ``(Fx, Fy)`` of ``K grad v`` with shapes ``(ny, nx+1)`` and ``(ny+1, nx)``.

    ``K`` is either a per-cell tensor field ``(ny, nx, 2, 2)`` or a per-corner
    one ``(4, ny, nx, 2, 2)``. Boundary entries are exactly zero.
    """
    if K.ndim == 4:
        return _cell_face_fluxes(K, v, grid)
    g = corner_gradients(v, grid)
    q = 0.25 * np.einsum("...ij,...j->...i", K, g)
    ny, nx = v.shape
    fx = np.zeros((ny, nx + 1))
    fy = np.zeros((ny + 1, nx))
    fx[:, 1:-1] = (q[0, :, :-1, 0] + q[1, :, :-1, 0]) + (q[2, :, 1:, 0] + q[3, :, 1:, 0])
    fy[1:-1, :] = (q[0, :-1, :, 1] + q[2, :-1, :, 1]) + (q[1, 1:, :, 1] + q[3, 1:, :, 1])
    return fx, fy


def _cell_face_fluxes(K, v, grid):
    # corner form with one tensor per cell: face-averaged diagonal entries,
    # face-averaged (Kxy * central tangential difference) for the cross terms
    ny, nx = v.shape
    c = gradient(v, grid)
    cross_x = K[..., 0, 1] * c[..., 1]
    cross_y = K[..., 1, 0] * c[..., 0]
    fx = np.zeros((ny, nx + 1))
    fy = np.zeros((ny + 1, nx))
    kxx = K[..., 0, 0]
    kyy = K[..., 1, 1]
    fx[:, 1:-1] = 0.5 * ((kxx[:, :-1] + kxx[:, 1:]) * (np.diff(v, axis=1) / grid.hx)
                         + cross_x[:, :-1] + cross_x[:, 1:])
    fy[1:-1, :] = 0.5 * ((kyy[:-1, :] + kyy[1:, :]) * (np.diff(v, axis=0) / grid.hy)
                         + cross_y[:-1, :] + cross_y[1:, :])
    return fx, fy


def flux_divergence(K, v, grid):
    """Conservative ``div(K grad v)`` with zero flux through the boundary."""
    fx, fy = face_fluxes(K, v, grid)
    return np.diff(fx, axis=1) / grid.hx + np.diff(fy, axis=0) / grid.hy


def isotropic_corner_divergence(c, v, grid):
    """``div(c grad v)`` for a per-corner scalar coefficient ``c`` of shape ``(4, ny, nx)``.

    Same operator as ``flux_divergence(scalar_tensor(c), v, grid)``, without
    the tensor algebra.
    """
    ny, nx = v.shape
    fx = np.zeros((ny, nx + 1))
    fy = np.zeros((ny + 1, nx))
    cx = 0.25 * ((c[0] + c[1])[:, :-1] + (c[2] + c[3])[:, 1:])
    cy = 0.25 * ((c[0] + c[2])[:-1, :] + (c[1] + c[3])[1:, :])
    fx[:, 1:-1] = cx * np.diff(v, axis=1) / grid.hx
    fy[1:-1, :] = cy * np.diff(v, axis=0) / grid.hy
    return np.diff(fx, axis=1) / grid.hx + np.diff(fy, axis=0) / grid.hy


def scalar_tensor(c):
    """Isotropic tensor field ``c I`` from a scalar array of any leading shape."""
    c = np.asarray(c, dtype=float)
    return c[..., None, None] * np.eye(2)


def _one_sided(n, h):
    # forward difference with a zero last row (mirror boundary)
    main = np.full(n, -1.0 / h)
    main[-1] = 0.0
    upper = np.full(n - 1, 1.0 / h)
    plus = sp.diags([main, upper], [0, 1], shape=(n, n), format="csr")
    # backward difference with a zero first row
    lower = np.full(n - 1, -1.0 / h)
    main = np.full(n, 1.0 / h)
    main[0] = 0.0
    minus = sp.diags([lower, main], [-1, 0], shape=(n, n), format="csr")
    return plus, minus


def difference_matrices(grid):
    """Sparse one-sided difference matrices ``(Dx+, Dx-, Dy+, Dy-)`` acting on raveled fields."""
    xp, xm = _one_sided(grid.nx, grid.hx)
    yp, ym = _one_sided(grid.ny, grid.hy)
    ix = sp.identity(grid.nx, format="csr")
    iy = sp.identity(grid.ny, format="csr")
    return (
        sp.kron(iy, xp, format="csr"),
        sp.kron(iy, xm, format="csr"),
        sp.kron(yp, ix, format="csr"),
        sp.kron(ym, ix, format="csr"),
    )


def assemble_flux_matrix(K, grid, diffs=None):
    """Sparse matrix of ``-div(K grad .)`` assembled from the corner form.

    Independent of :func:`flux_divergence`, which applies the same operator
    matrix-free.
    """
    K = np.broadcast_to(K, (4, grid.ny, grid.nx, 2, 2))
    dxp, dxm, dyp, dym = diffs if diffs is not None else difference_matrices(grid)
    gx = (dxp, dxp, dxm, dxm)
    gy = (dyp, dym, dyp, dym)
    out = sp.csr_matrix((grid.size, grid.size))
    for k in range(4):
        kxx = sp.diags(0.25 * K[k, ..., 0, 0].ravel())
        kxy = sp.diags(0.25 * K[k, ..., 0, 1].ravel())
        kyx = sp.diags(0.25 * K[k, ..., 1, 0].ravel())
        kyy = sp.diags(0.25 * K[k, ..., 1, 1].ravel())
        out = out + (
            gx[k].T @ (kxx @ gx[k] + kxy @ gy[k]) + gy[k].T @ (kyx @ gx[k] + kyy @ gy[k])
        )
    return out.tocsr()


def integrate(u, grid):
    """Midpoint quadrature over the rectangle."""
    return float(np.sum(u) * grid.cell_area)


def inner(u, w, grid):
    return float(np.sum(u * w) * grid.cell_area)


def norm_lp(u, r, grid):
    if r < 1:
        raise ValueError("norm exponent must be >= 1")
    return float((np.sum(np.abs(u) ** r) * grid.cell_area) ** (1.0 / r))


def norm_inf(u):
    return float(np.max(np.abs(u)))


def w1p_seminorm(u, r, grid):
    """``|| |grad u| ||_r`` with the cell-centred gradient."""
    g = gradient(u, grid)
    return norm_lp(np.hypot(g[..., 0], g[..., 1]), r, grid)


def w1p_norm(u, r, grid):
    return float((norm_lp(u, r, grid) ** r + w1p_seminorm(u, r, grid) ** r) ** (1.0 / r))
