import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import chebyshev_closed
from rvse.chebyshev import (
    ChebSeries,
    cheb_coeffs,
    dirichlet_kernel,
    kpm_reconstruct,
    reconstruct,
    resolvent_coeff,
    resolvent_coeffs,
    t_all,
    t_k,
)


class TestPolynomials:
    def test_low_orders(self):
        assert t_k(0.37, 0) == 1.0
        assert t_k(0.37, 1) == 0.37

    def test_second_order(self):
        assert t_k(0.5, 2) == pytest.approx(-0.5)

    @pytest.mark.parametrize("k", [0, 1, 2, 7, 100, 2001])
    def test_endpoint(self, k):
        assert t_k(-1.0, k) == (-1) ** k

    def test_clamp(self):
        assert t_k(1 + 1e-13, 5) == 1.0

    def test_recurrence_vs_closed_form(self):
        x = np.linspace(-1, 1, 201)
        table = t_all(x, 2000)
        k = np.arange(2001)[:, None]
        assert np.max(np.abs(table - chebyshev_closed(x, k))) < 1e-10

    def test_t_k_agrees_with_table(self):
        x = np.linspace(-0.9, 0.9, 7)
        assert np.allclose(t_k(x, 37), t_all(x, 40)[37])


class TestCoefficients:
    def test_linear(self):
        c = cheb_coeffs(lambda w: w, 8).coefficients
        assert abs(c[1] - 1) < 1e-12
        assert np.max(np.abs(np.delete(c, 1))) < 1e-12

    def test_t2(self):
        c = cheb_coeffs(lambda w: 2 * w**2 - 1, 8).coefficients
        assert abs(c[2] - 1) < 1e-12
        assert np.max(np.abs(np.delete(c, 2))) < 1e-12

    def test_exp(self):
        s = cheb_coeffs(np.exp, 20)
        assert abs(reconstruct(s, 0.3) - np.exp(0.3)) < 1e-12

    def test_exp_grid(self):
        s = cheb_coeffs(np.exp, 30)
        x = np.linspace(-1, 1, 101)
        assert np.max(np.abs(reconstruct(s, x) - np.exp(x))) < 1e-13

    def test_scalar_callable(self):
        s = cheb_coeffs(lambda w: float(np.cos(w)), 10)
        assert abs(reconstruct(s, -0.2) - np.cos(-0.2)) < 1e-12

    def test_quadrature_guard(self):
        with pytest.raises(ValueError):
            cheb_coeffs(np.exp, 10, n_quad=21)


class TestReconstruct:
    def test_constant(self):
        assert reconstruct(ChebSeries([1, 0, 0]), -0.7) == 1

    def test_linear(self):
        assert reconstruct(ChebSeries([0, 1]), 0.25) == 0.25

    def test_clenshaw_vs_naive(self):
        rng = np.random.default_rng(0)
        c = rng.normal(size=200) + 1j * rng.normal(size=200)
        x = np.linspace(-1, 1, 51)
        naive = c @ t_all(x, 199)
        assert np.max(np.abs(reconstruct(ChebSeries(c), x) - naive)) < 1e-10 * np.sum(np.abs(c))

    def test_rejects_bad_series(self):
        with pytest.raises(ValueError):
            ChebSeries([])
        with pytest.raises(ValueError):
            ChebSeries([1.0, np.nan])


class TestKPM:
    def test_delta_integrates_to_one(self):
        K = 200
        mu = t_all(0.3, K)
        w = np.linspace(-0.999, 0.999, 20001)
        rho = kpm_reconstruct(mu, dirichlet_kernel(K), w)
        assert abs(np.trapezoid(rho, w) - 1) < 0.02

    def test_zero_moments(self):
        assert np.all(kpm_reconstruct(np.zeros(5), np.ones(5), np.linspace(-0.9, 0.9, 5)) == 0)

    def test_single_moment(self):
        w = np.array([-0.5, 0.0, 0.8])
        assert np.allclose(kpm_reconstruct([1.0], [1.0], w), 1 / (np.pi * np.sqrt(1 - w**2)))

    def test_guards(self):
        with pytest.raises(ValueError):
            kpm_reconstruct([1.0], [1.0], 1.0)
        with pytest.raises(ValueError):
            kpm_reconstruct([1.0, 0.0], [1.0], 0.0)


class TestResolvent:
    def test_decay(self):
        theta = np.arccos(0.1j)
        c0, c1 = resolvent_coeff(0.1j, 0), resolvent_coeff(0.1j, 1)
        assert abs(c1 / c0) / 2 < 1
        assert abs(np.exp(-1j * theta)) < 1

    def test_prefactor(self):
        z = 0.3 + 0.2j
        assert resolvent_coeff(z, 1) / resolvent_coeff(z, 0) == pytest.approx(2 * np.exp(-1j * np.arccos(z)))

    def test_partial_sum(self):
        z, x, K = 0.2 + 0.05j, -0.4, 4000
        s = np.sum(resolvent_coeffs(z, K) * t_all(x, K))
        assert abs(s - 1 / (z - x)) < 1e-6

    def test_lower_half_plane_and_conjugation(self):
        z, x, K = -0.6 - 0.08j, 0.1, 3000
        c = resolvent_coeffs(z, K)
        assert np.allclose(c, np.conj(resolvent_coeffs(np.conj(z), K)))
        assert abs(np.sum(c * t_all(x, K)) - 1 / (z - x)) < 1e-6

    def test_geometric_convergence(self):
        z, x = 0.1 + 0.05j, 0.35
        exact = 1 / (z - x)
        errs = []
        for K in (100, 200, 400):
            errs.append(abs(np.sum(resolvent_coeffs(z, K) * t_all(x, K)) - exact))
        rho = abs(np.exp(-1j * np.arccos(z)))
        # each doubling of K shrinks the tail by about rho^K
        assert errs[1] < errs[0] * rho**80
        assert errs[2] < errs[1] * rho**150

    def test_real_axis_rejected(self):
        with pytest.raises(ValueError):
            resolvent_coeff(0.5, 0)
        with pytest.raises(ValueError):
            resolvent_coeffs(np.array([0.1j, 1.5]), 3)

    def test_shape(self):
        assert resolvent_coeffs(np.full((2, 3), 0.1j), 4).shape == (2, 3, 5)

    @given(st.floats(-0.99, 0.99), st.floats(0.01, 0.5), st.floats(-0.95, 0.95))
    @settings(max_examples=40, deadline=None)
    def test_series_identity(self, re, im, x):
        # sum_k (2 - delta) e^{-ik theta} T_k(x) = i sin(theta) / (z - x)
        z = complex(re, im)
        K = int(40 / im)
        s = np.sum(resolvent_coeffs(z, K) * t_all(x, K))
        assert abs(s - 1 / (z - x)) < 1e-6 * (1 + abs(1 / (z - x)))
