import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facetflow import grid as gm
from facetflow.grid import Grid


def random_spd_field(rng, shape):
    A = rng.normal(size=shape + (2, 2))
    return np.einsum("...ij,...kj->...ik", A, A) + 0.1 * np.eye(2)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(3, 8)
    with pytest.raises(ValueError):
        Grid(8, 8, lx=-1.0)
    with pytest.raises(ValueError, match="cap"):
        Grid(64, 64, max_cells=1000)


def test_spacings_and_shape():
    g = Grid(8, 4, lx=2.0, ly=1.0)
    assert g.hx == 0.25 and g.hy == 0.25
    assert g.shape == (4, 8) and g.size == 32 and g.measure == 2.0


class TestGradient:
    def test_constant(self):
        g = Grid(6, 5)
        assert np.all(gm.gradient(g.full(7.0), g) == 0.0)

    def test_linear_in_x(self):
        g = Grid(10, 6)
        X, _ = g.cell_centers()
        d = gm.gradient(X, g)
        np.testing.assert_allclose(d[:, 1:-1, 0], 1.0, rtol=1e-12)
        # mirrored ghost: the boundary layer sees half the slope
        np.testing.assert_allclose(d[:, [0, -1], 0], 0.5, rtol=1e-12)
        assert np.all(d[..., 1] == 0)

    def test_linear_in_y_is_symmetric_counterpart(self):
        gx, gy = Grid(10, 6), Grid(6, 10)
        dx = gm.gradient(gx.cell_centers()[0], gx)
        dy = gm.gradient(gy.cell_centers()[1], gy)
        np.testing.assert_allclose(dy[..., 1], dx[..., 0].T, rtol=1e-12)
        assert np.all(dy[..., 0] == 0)


class TestFluxDivergence:
    def test_constant_has_no_flux(self):
        rng = np.random.default_rng(0)
        g = Grid(7, 5)
        K = random_spd_field(rng, g.shape)
        assert np.max(np.abs(gm.flux_divergence(K, g.full(3.0), g))) == 0.0

    def test_identity_gives_five_point_laplacian(self):
        g = Grid(8, 8)
        delta = g.zeros()
        delta[4, 4] = 1.0
        got = gm.flux_divergence(gm.scalar_tensor(np.ones(g.shape)), delta, g)
        expected = g.zeros()
        expected[4, 4] = -4 / g.hx**2
        for j, i in ((3, 4), (5, 4), (4, 3), (4, 5)):
            expected[j, i] = 1 / g.hx**2
        np.testing.assert_allclose(got, expected, atol=1e-10)

    def test_boundary_fluxes_are_zero(self):
        rng = np.random.default_rng(1)
        g = Grid(6, 9)
        K = random_spd_field(rng, g.shape)
        fx, fy = gm.face_fluxes(K, rng.normal(size=g.shape), g)
        assert np.all(fx[:, [0, -1]] == 0) and np.all(fy[[0, -1], :] == 0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(4, 12), st.integers(4, 12), st.integers(0, 2**31))
    def test_adjoint_conservative_and_semidefinite(self, nx, ny, seed):
        rng = np.random.default_rng(seed)
        g = Grid(nx, ny, lx=rng.uniform(0.5, 2), ly=rng.uniform(0.5, 2))
        K = random_spd_field(rng, g.shape)
        v, w = rng.normal(size=(2,) + g.shape)
        Lv, Lw = gm.flux_divergence(K, v, g), gm.flux_divergence(K, w, g)
        a, b = gm.inner(Lv, w, g), gm.inner(Lw, v, g)
        assert abs(a - b) <= 1e-10 * max(abs(a), abs(b), 1.0)
        assert abs(gm.integrate(Lv, g)) <= 1e-12 * max(1.0, gm.integrate(np.abs(Lv), g))
        assert gm.inner(Lv, v, g) <= 1e-12 * max(1.0, gm.integrate(np.abs(Lv * v), g))

    def test_matrix_free_matches_sparse_assembly_per_corner(self):
        rng = np.random.default_rng(2)
        g = Grid(9, 7)
        K = random_spd_field(rng, (4,) + g.shape)
        A = gm.assemble_flux_matrix(K, g).toarray()
        for k in range(0, g.size, 5):
            e = np.zeros(g.size)
            e[k] = 1.0
            col = -gm.flux_divergence(K, e.reshape(g.shape), g).ravel()
            np.testing.assert_allclose(col, A[:, k], atol=1e-12 * np.abs(A).max())

    def test_dense_matrix_symmetric_and_psd(self):
        rng = np.random.default_rng(3)
        g = Grid(12, 12)
        A = gm.assemble_flux_matrix(random_spd_field(rng, g.shape), g).toarray()
        np.testing.assert_allclose(A, A.T, atol=1e-12 * np.abs(A).max())
        assert np.linalg.eigvalsh(A).min() > -1e-9 * np.abs(A).max()

    def test_isotropic_shortcut_agrees_with_tensor_path(self):
        rng = np.random.default_rng(4)
        g = Grid(8, 6)
        c = rng.uniform(0.5, 2.0, size=(4,) + g.shape)
        v = rng.normal(size=g.shape)
        np.testing.assert_allclose(gm.isotropic_corner_divergence(c, v, g),
                                   gm.flux_divergence(gm.scalar_tensor(c), v, g), rtol=1e-12, atol=1e-10)


class TestQuadrature:
    def test_constants(self):
        g = Grid(5, 5)
        assert gm.integrate(g.full(2.0), g) == pytest.approx(2.0)
        assert gm.integrate(g.zeros(), g) == 0.0

    def test_midpoint_exact_for_linears(self):
        g = Grid(128, 128)
        X, _ = g.cell_centers()
        assert abs(gm.integrate(X, g) - 0.5) < 1e-12

    @pytest.mark.parametrize("r", [1, 1.5, 2, 4])
    def test_norm_of_one(self, r):
        g = Grid(6, 6)
        assert gm.norm_lp(g.full(1.0), r, g) == pytest.approx(1.0)

    def test_norm_inf(self):
        g = Grid(6, 6)
        u = g.zeros()
        u[2, 3] = -5.0
        assert gm.norm_inf(u) == 5.0

    def test_l2_norm_of_x_second_order(self):
        errs = []
        for n in (16, 32, 64):
            g = Grid(n, n)
            X, _ = g.cell_centers()
            errs.append(abs(gm.norm_lp(X, 2, g) - 3**-0.5))
        assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5

    def test_norm_exponent_checked(self):
        with pytest.raises(ValueError):
            gm.norm_lp(np.ones((4, 4)), 0.5, Grid(4, 4))

    def test_w1p_of_linear(self):
        g = Grid(64, 64)
        X, _ = g.cell_centers()
        # interior slope 1, half slope on the two mirrored columns
        expected = ((62 + 2 * 0.5**3) / 64) ** (1 / 3)
        assert gm.w1p_seminorm(X, 3, g) == pytest.approx(expected, rel=1e-12)
