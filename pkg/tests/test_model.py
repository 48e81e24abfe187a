import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from facetflow.model import (ModelParams, grad_psi_tau, hess_psi_tau, in_subgradient,
                             mobility_D, mobility_D_tau, psi_tau, rho, rho_tau, s_lambda_factor,
                             subgradient_select)

finite = st.floats(-50, 50, allow_nan=False)
vec = st.tuples(finite, finite).map(np.array)
taus = st.floats(1e-8, 1.0)
qs = st.floats(0.0, 20.0)


def P(p=2.0, beta=1.0, q=0.0, a=1.0, tau=1.0):
    return ModelParams(p=p, beta=beta, q=q, a=a, tau=tau)


class TestParams:
    def test_defaults_valid(self):
        prm = ModelParams(p=1.5, beta=1.0)
        assert prm.tau == 1.0 and prm.q == 0.0

    def test_p_gate_message(self):
        with pytest.raises(ValueError, match="p > 1"):
            ModelParams(p=0.9, beta=1.0)

    def test_strict_mode_caps_p(self):
        with pytest.raises(ValueError, match="relaxed"):
            ModelParams(p=2.5, beta=1.0)
        assert ModelParams(p=2.5, beta=1.0, relaxed=True).p == 2.5

    def test_all_violations_reported(self):
        with pytest.raises(ValueError) as err:
            ModelParams(p=0.5, beta=-1.0, q=-1.0, a=0.0, tau=2.0)
        text = str(err.value)
        for key in ("p must", "beta", "q must", "a must", "tau must"):
            assert key in text

    def test_with_tau(self):
        assert P(tau=0.5).with_tau(0.25).tau == 0.25


class TestRho:
    def test_unit_argument(self):
        assert rho(1.0, P(p=2, beta=1)) == pytest.approx(2.0)

    def test_singular_at_zero(self):
        with pytest.raises(ValueError):
            rho(0.0, P())

    def test_quarter_power_value(self):
        assert rho(4.0, P(p=1.5, beta=0.5)) == pytest.approx(4**-0.25 + 0.25, rel=1e-15)

    @pytest.mark.parametrize("s,tau,p,beta", [(0, 1, 2, 1), (0.75, 0.25, 1.5, 0.5), (3, 1, 1.2, 2)])
    def test_regularised_against_oracle(self, s, tau, p, beta):
        expected = float(oracles.rho_tau(s, tau, p, beta))
        assert rho_tau(s, P(p=p, beta=beta, tau=tau)) == pytest.approx(expected, rel=1e-14)

    def test_regularised_known_values(self):
        assert rho_tau(0.0, P(p=2, beta=1, tau=1)) == 2.0
        assert rho_tau(0.75, P(p=1.5, beta=0.5, tau=0.25)) == pytest.approx(1.5)
        assert rho_tau(3.0, P(p=1.2, beta=2, tau=1)) == pytest.approx(1.57434, abs=1e-5)


class TestPsi:
    def test_origin(self):
        assert psi_tau(np.zeros(2), P(p=2, beta=1, tau=1)) == pytest.approx(1.5)

    def test_quadratic_limit(self):
        prm = ModelParams(p=2.0, beta=1e-300, tau=1e-12)
        assert psi_tau(np.array([3.0, 4.0]), prm) == pytest.approx(12.5, rel=1e-10)

    def test_gradient_known_value(self):
        g = grad_psi_tau(np.array([1.0, 0.0]), P(p=2, beta=1, tau=1))
        np.testing.assert_allclose(g, [1 + 2**-0.5, 0.0], rtol=1e-15)

    def test_gradient_is_odd_and_zero_at_origin(self):
        assert np.all(grad_psi_tau(np.zeros(2), P()) == 0)

    def test_gradient_against_extended_precision_derivative(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            xi = rng.normal(size=2) * 3
            p, beta, tau = rng.uniform(1.1, 2), rng.uniform(0.1, 2), rng.uniform(1e-3, 1)
            got = grad_psi_tau(xi, P(p=p, beta=beta, tau=tau))
            np.testing.assert_allclose(got, oracles.grad_psi_tau(xi, tau, p, beta), rtol=1e-12, atol=1e-14)

    def test_gradient_central_difference(self):
        rng = np.random.default_rng(4)
        prm = P(p=1.6, beta=0.7, tau=0.3)
        h = 1e-5
        for xi in rng.normal(size=(100, 2)):
            fd = [(psi_tau(xi + h * e, prm) - psi_tau(xi - h * e, prm)) / (2 * h) for e in np.eye(2)]
            np.testing.assert_allclose(grad_psi_tau(xi, prm), fd, rtol=1e-6, atol=1e-9)

    def test_hessian_against_extended_precision(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            xi = rng.normal(size=2)
            p, beta, tau = rng.uniform(1.1, 2), rng.uniform(0.1, 2), rng.uniform(1e-2, 1)
            np.testing.assert_allclose(hess_psi_tau(xi, P(p=p, beta=beta, tau=tau)),
                                       oracles.hess_psi_tau(xi, tau, p, beta), rtol=1e-10, atol=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(vec, vec, taus, st.floats(1.01, 2.0), st.floats(0.01, 5.0))
    def test_convexity(self, x, y, tau, p, beta):
        prm = P(p=p, beta=beta, tau=tau)
        mid = psi_tau(0.5 * (x + y), prm)
        avg = 0.5 * (psi_tau(x, prm) + psi_tau(y, prm))
        assert mid <= avg * (1 + 1e-14) + 1e-14


class TestMobility:
    def test_identity_at_zero_gradient(self):
        np.testing.assert_array_equal(mobility_D(np.zeros(2), 5.0), np.eye(2))

    def test_axis_gradient(self):
        np.testing.assert_allclose(mobility_D(np.array([1.0, 0.0]), 1.0), [[0.5, 0], [0, 1]])

    def test_zero_slope_is_identity(self, ):
        np.testing.assert_allclose(mobility_D(np.array([0.3, -2.0]), 0.0), np.eye(2), atol=1e-15)

    def test_regularised_values(self):
        np.testing.assert_allclose(mobility_D_tau(np.zeros(2), 3.0, 0.5), 1.5 * np.eye(2))
        np.testing.assert_allclose(mobility_D_tau(np.array([1.0, 0.0]), 1.0, 0.25),
                                   [[0.85, 0], [0, 1.25]], rtol=1e-15)

    def test_regularised_against_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            xi, q, tau = rng.normal(size=2) * 4, rng.uniform(0, 10), rng.uniform(1e-6, 1)
            np.testing.assert_allclose(mobility_D_tau(xi, q, tau), oracles.mobility_D_tau(xi, q, tau),
                                       rtol=1e-13, atol=1e-15)

    @settings(max_examples=300, deadline=None)
    @given(vec, vec, qs, taus)
    def test_regularised_bounds(self, xi, w, q, tau):
        D = mobility_D_tau(xi, q, tau)
        assert np.allclose(D, D.T, atol=1e-15)
        assert np.all(np.abs(D) <= 2.0)
        floor = (1 / (1 + q * np.linalg.norm(xi)) + tau) * (w @ w)
        assert w @ D @ w >= floor - 1e-12 * max(1.0, w @ w)

    def test_factorisation_examples(self):
        S, L = s_lambda_factor(np.array([0.0, 1.0]), 0.0)
        np.testing.assert_allclose(S, [[0, -1], [1, 0]], atol=1e-15)
        np.testing.assert_allclose(L, np.eye(2))
        S, L = s_lambda_factor(np.array([3.0, 4.0]), 1.0)
        np.testing.assert_allclose(np.diag(L), [1 / 6, 1])
        np.testing.assert_allclose(S[:, 0], [0.6, 0.8])
        np.testing.assert_allclose(S[:, 1], [-0.8, 0.6])
        np.testing.assert_allclose(S @ L @ S.T, mobility_D(np.array([3.0, 4.0]), 1.0), atol=1e-15)

    def test_factorisation_undefined_at_zero(self):
        with pytest.raises(ValueError):
            s_lambda_factor(np.zeros(2), 1.0)

    def test_factorisation_batch_unitarity(self):
        rng = np.random.default_rng(7)
        xi = rng.normal(size=(10_000, 2)) * 10 ** rng.uniform(-3, 2, size=(10_000, 1))
        q = rng.uniform(0, 10, size=10_000)
        S, L = s_lambda_factor(xi, q)
        eye = np.einsum("nij,nkj->nik", S, S)
        assert np.max(np.abs(eye - np.eye(2))) < 1e-12
        prod = np.einsum("nij,njk,nlk->nil", S, L, S)
        assert np.max(np.abs(prod - mobility_D(xi, q))) < 1e-12


class TestSubgradient:
    def test_zero_maps_to_zero(self):
        np.testing.assert_array_equal(subgradient_select(np.zeros(2), 0.3), [0, 0])

    def test_unit_direction_limit(self):
        np.testing.assert_allclose(subgradient_select(np.array([3.0, 4.0]), 1e-16), [0.6, 0.8])

    @settings(max_examples=300, deadline=None)
    @given(vec, taus)
    def test_inside_unit_ball(self, xi, tau):
        assert np.linalg.norm(subgradient_select(xi, tau)) <= 1.0

    def test_membership_examples(self):
        assert in_subgradient(np.array([0.6, 0.8]), np.array([3.0, 4.0]), 1e-8)
        assert in_subgradient(np.array([0.2, -0.3]), np.zeros(2), 1e-8)
        assert not in_subgradient(np.array([1.5, 0.0]), np.zeros(2), 1e-8)

    def test_membership_rejects_wrong_direction(self):
        assert not in_subgradient(np.array([0.8, 0.6]), np.array([3.0, 4.0]), 1e-8)
