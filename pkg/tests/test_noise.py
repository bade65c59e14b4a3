import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_hermitian_terms, random_state
from rvse.noise import (
    EpsilonSequence,
    NoiseModel,
    absolute_error_delta,
    bernoulli_records,
    epsilon_sequence,
    error_sum,
    expected_abs_shift,
    hadamard_estimate,
    hadamard_estimate_batch,
    lcu_variance_bound,
    mean_noisy_expectation,
    noisy_expectation,
    noisy_records,
    sample_lcu_expectation,
)
from rvse.pauli import OperatorLCU, builtin_hamiltonian
from rvse.rvse import rescale_records, run_rvse
from rvse.statevec import StateVector, apply_lcu, inner, scale_hamiltonian


class TestModel:
    def test_defaults_inactive(self):
        assert not NoiseModel().active

    @pytest.mark.parametrize("kw", [{"mode": "bogus"}, {"phi_convention": "x"}, {"coupling": "x"}, {"mode": "surrogate", "shots": 0}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            NoiseModel(**kw)

    def test_phi_scale(self):
        assert NoiseModel(shots=100).phi_scale() == 0.01
        assert NoiseModel(shots=100, phi_convention="sqrt").phi_scale() == 0.1

    def test_seeded_rng_reproducible(self):
        m = NoiseModel(seed=5)
        assert m.rng().normal() == m.rng().normal()


class TestHadamard:
    def test_deterministic_extremes(self):
        rng = np.random.default_rng(0)
        assert hadamard_estimate(1 - 1j, 10, rng) == 1 - 1j

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            hadamard_estimate(1.5, 10, np.random.default_rng(0))
        with pytest.raises(ValueError):
            hadamard_estimate_batch([0.2, -1.1j], 10, np.random.default_rng(0))

    def test_outcomes_on_lattice(self):
        est = hadamard_estimate_batch(np.full(200, 0.3 + 0.1j), 7, np.random.default_rng(1))
        assert np.allclose((est.real * 7 + 7) / 2, np.round((est.real * 7 + 7) / 2))

    def test_unbiased_and_variance(self):
        rng = np.random.default_rng(2)
        z, S, n = 0.4 - 0.25j, 50, 200_000
        est = hadamard_estimate_batch(np.full(n, z), S, rng)
        var_re = (1 - z.real**2) / S
        assert abs(est.real.mean() - z.real) < 5 * math.sqrt(var_re / n)
        assert est.real.var() == pytest.approx(var_re, rel=0.02)
        assert est.imag.var() == pytest.approx((1 - z.imag**2) / S, rel=0.02)

    def test_scalar_matches_batch_stream(self):
        a = hadamard_estimate(0.3 + 0.2j, 40, np.random.default_rng(3))
        b = hadamard_estimate_batch([0.3 + 0.2j], 40, np.random.default_rng(3))[0]
        assert a == b


class TestLCUEstimator:
    def test_bound_formula(self):
        assert lcu_variance_bound([0.3, -0.4], 100) == pytest.approx(0.25 / 100)
        assert lcu_variance_bound([1.0, 1.0], [1, 4]) == pytest.approx(1.25)
        with pytest.raises(ValueError):
            lcu_variance_bound([1.0], 0)

    def test_unbiased_within_bound(self):
        rng = np.random.default_rng(4)
        op = OperatorLCU(2, random_hermitian_terms(rng, 2, 5), hermitian=True)
        psi = StateVector(random_state(rng, 2))
        exact = inner(psi, apply_lcu(op, psi)).real
        draws = np.array([sample_lcu_expectation(op, psi, 30, rng) for _ in range(4000)])
        bound = lcu_variance_bound(op.coefficients, 30)
        assert abs(draws.mean() - exact) < 5 * math.sqrt(bound / draws.size)
        assert draws.var() <= bound * 1.1


class TestEpsilon:
    def test_first_value(self):
        # sigma = sqrt(1/100), eps = 2 sigma / sqrt(pi)
        seq = epsilon_sequence([1.0, 0.5], 1.0, 100)
        assert seq.eps[0] == 0.0
        assert seq.eps[1] == pytest.approx(0.11283791670955126, rel=1e-15)

    def test_second_value_by_hand(self):
        norms, c2, S = [1.0, 0.6, 0.3], 0.5, 64
        seq = epsilon_sequence(norms, c2, S)
        e1 = 2 * math.sqrt(c2 / S) / math.sqrt(math.pi)
        smu = 2 * (0.6 + e1) * math.sqrt(c2 / S)
        snu = 1.0 / 8
        assert seq.sigma_mu[2] == pytest.approx(smu)
        assert seq.sigma_nu[2] == pytest.approx(snu)
        assert seq.eps[2] == pytest.approx(2 * math.hypot(smu, snu) / math.sqrt(math.pi))

    def test_length_checked(self):
        with pytest.raises(ValueError):
            epsilon_sequence([1.0, 1.0], 1.0, 10, K=3)

    @pytest.mark.parametrize("coupling", ["same", "independent"])
    def test_monte_carlo(self, coupling):
        rng = np.random.default_rng(5)
        smu, snu, n = 0.03, 0.02, 400_000
        a, b = smu * rng.standard_normal(n), snu * rng.standard_normal(n)
        if coupling == "same":
            samples = np.abs((a + b) * (1 + 1j))
        else:
            c, d = smu * rng.standard_normal(n), snu * rng.standard_normal(n)
            samples = np.abs(a + b + 1j * (c + d))
        assert expected_abs_shift(smu, snu, coupling) == pytest.approx(samples.mean(), rel=0.005)

    @given(
        st.lists(st.floats(0.01, 3.0), min_size=2, max_size=30),
        st.floats(0.01, 5.0),
        st.integers(1, 10_000),
        st.floats(1.5, 50.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_homogeneous_in_norms(self, norms, c2, S, factor):
        # sigma's are linear in the norms and eps_0 = 0, so eps is degree-1 homogeneous
        a = epsilon_sequence(norms, c2, S).eps
        b = epsilon_sequence([factor * x for x in norms], c2, S).eps
        assert np.allclose(b, factor * a, rtol=1e-12, atol=0)

    def test_monotone_in_shots(self):
        norms = np.linspace(1.0, 0.2, 20)
        assert np.all(epsilon_sequence(norms, 0.3, 100).eps >= epsilon_sequence(norms, 0.3, 1000).eps)

    def test_k1_ratio_is_sqrt10(self):
        r = epsilon_sequence([1, 1], 0.7, 100).eps[1] / epsilon_sequence([1, 1], 0.7, 1000).eps[1]
        assert r == pytest.approx(math.sqrt(10), rel=1e-14)


def h2_records(K=30):
    h_sc, _ = scale_hamiltonian(builtin_hamiltonian("h2_sto3g"), "auto")
    chi0 = StateVector(2.0 * StateVector.basis("1100").amplitudes)
    return h_sc, chi0, rescale_records(run_rvse(h_sc, chi0, K), chi0.norm())


class TestNoisyRecords:
    def test_mode_checked(self):
        _, _, rec = h2_records(5)
        with pytest.raises(ValueError):
            noisy_records(rec, NoiseModel(mode="bernoulli"), 1.0)

    def test_shifts(self):
        h_sc, _, rec = h2_records(10)
        model = NoiseModel(shots=100, mode="surrogate", seed=1)
        noisy = noisy_records(rec, model, h_sc.sum_sq())
        eps = epsilon_sequence([r.norm for r in rec], h_sc.sum_sq(), 100)
        for r, q in zip(rec, noisy):
            assert q.norm_noisy == pytest.approx(r.norm + eps.eps[r.k])
            d = q.overlap_noisy - r.overlap
            assert d.real == pytest.approx(d.imag)
            assert abs(d.real) < 6 * model.phi_scale()

    def test_independent_coupling(self):
        _, _, rec = h2_records(10)
        model = NoiseModel(shots=100, mode="surrogate", coupling="independent", seed=1)
        noisy = noisy_records(rec, model, 1.0)
        d = np.array([q.overlap_noisy - r.overlap for r, q in zip(rec, noisy)])
        assert not np.allclose(d.real, d.imag)

    def test_mean_noisy_expectation_is_average(self):
        h_sc, chi0, rec = h2_records(8)
        model = NoiseModel(shots=100, mode="surrogate")
        eps = epsilon_sequence([r.norm for r in rec], h_sc.sum_sq(), 100)
        c = np.linspace(1, 0.2, 9)
        rng = np.random.default_rng(6)
        draws = [noisy_expectation(noisy_records(rec, model, h_sc.sum_sq(), rng, eps), chi0.norm(), c) for _ in range(3000)]
        mean = mean_noisy_expectation(rec, eps, chi0.norm(), c)
        spread = np.std(draws) / math.sqrt(len(draws))
        assert abs(np.mean(draws) - mean) < 5 * spread + 1e-12


class TestBernoulli:
    def test_large_s_converges(self):
        h_sc, chi0, rec = h2_records(6)
        noisy = bernoulli_records(h_sc, chi0, 6, NoiseModel(shots=10**8, mode="bernoulli", seed=2))
        assert noisy[0].norm_noisy == pytest.approx(2.0)
        assert noisy[0].eps == 0.0
        for r, q in zip(rec, noisy):
            assert q.norm_noisy == pytest.approx(r.norm, rel=1e-2, abs=1e-2)
            assert abs(q.overlap_noisy - r.overlap) < 1e-2

    def test_reproducible(self):
        h_sc, chi0, _ = h2_records(4)
        m = NoiseModel(shots=50, mode="bernoulli", seed=7)
        a = bernoulli_records(h_sc, chi0, 4, m)
        b = bernoulli_records(h_sc, chi0, 4, m)
        assert a == b

    def test_mode_checked(self):
        h_sc, chi0, _ = h2_records(2)
        with pytest.raises(ValueError):
            bernoulli_records(h_sc, chi0, 2, NoiseModel())


class TestDelta:
    def test_identity_with_mean_expectation(self):
        h_sc, chi0, rec = h2_records(20)
        eps = epsilon_sequence([r.norm for r in rec], h_sc.sum_sq(), 100)
        rng = np.random.default_rng(8)
        c = rng.normal(size=21) + 1j * rng.normal(size=21)
        nrm = chi0.norm()
        exact = nrm * np.sum(c * np.array([r.norm * r.overlap for r in rec]))
        gap = mean_noisy_expectation(rec, eps, nrm, c) - exact
        ov = [r.overlap for r in rec]
        assert absolute_error_delta(c, eps, ov, nrm) == pytest.approx(abs(gap), abs=1e-12)
        assert absolute_error_delta(lambda k: c[k], eps.eps, ov, nrm) == pytest.approx(abs(gap), abs=1e-12)

    def test_matrix_coefficients(self):
        eps = EpsilonSequence(np.zeros(3), np.zeros(3), np.array([0.0, 0.1, 0.2]))
        c = np.array([[1, 1, 1], [0, 0, 1]])
        out = absolute_error_delta(c, eps, [1, 0.5j, -1], 2.0)
        assert np.allclose(out, [abs(2 * (0.05j - 0.2)), 0.4])
        assert error_sum(c[1], eps, [1, 0.5j, -1], 2.0) == pytest.approx(-0.4)

    def test_norms_in_place_of_eps_give_expansion(self):
        h_sc, chi0, rec = h2_records(15)
        c = np.random.default_rng(9).normal(size=16)
        norms = np.array([r.norm for r in rec])
        ov = np.array([r.overlap for r in rec])
        expansion = chi0.norm() * np.sum(c * norms * ov)
        assert absolute_error_delta(c, norms, ov, chi0.norm()) == pytest.approx(abs(expansion), abs=1e-14)

    def test_zero_eps(self):
        assert absolute_error_delta([1, 2], [0, 0], [1, 1], 1.0) == 0.0
