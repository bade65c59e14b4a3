import tracemalloc

import numpy as np
import pytest

from oracles import chebyshev_closed, lcu_matrix, random_hermitian_terms, random_state
from rvse.chebyshev import cheb_coeffs, resolvent_coeff
from rvse.errors import AnnihilationError, DimensionError
from rvse.pauli import OperatorLCU, builtin_hamiltonian, scale_spectral
from rvse.rvse import (
    assemble_expectation,
    chebyshev_states,
    iter_chebyshev_states,
    moments_direct,
    recursion_step,
    record_moments,
    rescale_records,
    run_rvse,
)
from rvse.statevec import StateVector, apply_lcu, exact_diagonalize, scale_hamiltonian


def random_scaled(rng, n, n_terms, margin=0.05):
    terms = random_hermitian_terms(rng, n, n_terms)
    op = OperatorLCU(n, terms, hermitian=True)
    evals = np.linalg.eigvalsh(lcu_matrix(terms, n))
    return scale_spectral(op, evals[0], evals[-1], margin)[0]


def spectral_moments(h_sc, psi, K):
    mat = lcu_matrix(h_sc.terms, h_sc.n_qubits)
    evals, vecs = np.linalg.eigh(mat)
    w = np.abs(vecs.conj().T @ psi) ** 2
    return chebyshev_closed(evals[None, :], np.arange(K + 1)[:, None]) @ w


class TestRecursionStep:
    def test_first_step(self):
        rng = np.random.default_rng(0)
        h = random_scaled(rng, 2, 5)
        chi0 = StateVector(random_state(rng, 2))
        state, norm = recursion_step(h, (chi0, 1.0))
        hx = apply_lcu(h, chi0)
        assert norm == pytest.approx(hx.norm(), rel=1e-14)
        assert np.allclose(state.amplitudes, hx.amplitudes / hx.norm())

    def test_eigenstate_closure(self):
        op = OperatorLCU(1, [(0.6, "Z")], hermitian=True)
        chi0 = StateVector.basis("0")
        s1, n1 = recursion_step(op, (chi0, 1.0))
        s2, n2 = recursion_step(op, (s1, n1), (chi0, 1.0))
        assert n1 == pytest.approx(0.6)
        assert n2 == pytest.approx(abs(2 * 0.36 - 1))
        assert abs(abs(s2.amplitudes[0]) - 1) < 1e-14

    def test_matches_unnormalized(self):
        rng = np.random.default_rng(1)
        h = random_scaled(rng, 3, 8)
        chi0 = StateVector(random_state(rng, 3))
        mat = lcu_matrix(h.terms, 3)
        seq = chebyshev_states(h, chi0, 30)
        prev, cur = chi0.amplitudes, mat @ chi0.amplitudes
        direct = [1.0, np.linalg.norm(cur)]
        for _ in range(29):
            prev, cur = cur, 2 * mat @ cur - prev
            direct.append(np.linalg.norm(cur))
        assert np.allclose(seq.norms, direct, atol=1e-10)
        for s in seq.normalized_states:
            assert s.norm() == pytest.approx(1.0, abs=1e-10)

    def test_annihilation(self):
        # T_1(0) = 0 on a zero-energy eigenstate
        op = OperatorLCU(2, [(0.5, "ZI"), (0.5, "IZ")], hermitian=True)
        with pytest.raises(AnnihilationError):
            run_rvse(op, StateVector.basis("01"), 3)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            run_rvse(OperatorLCU(2, [(0.5, "ZZ")], hermitian=True), StateVector.basis("0"), 2)


class TestRun:
    def test_k0(self):
        rec = run_rvse(OperatorLCU(1, [(0.5, "X")], hermitian=True), StateVector.basis("0"), 0)
        assert len(rec) == 1
        assert (rec[0].k, rec[0].norm, rec[0].overlap) == (0, 1.0, 1 + 0j)

    def test_eigenstate_moments(self):
        e = 0.37
        op = OperatorLCU(2, [(e, "ZI")], hermitian=True)
        rec = run_rvse(op, StateVector.basis("00"), 40)
        assert np.allclose(record_moments(rec).real, chebyshev_closed(e, np.arange(41)), atol=1e-12)

    def test_normalizes_input(self):
        rng = np.random.default_rng(2)
        h = random_scaled(rng, 2, 4)
        psi = random_state(rng, 2)
        a = run_rvse(h, StateVector(psi), 10)
        b = run_rvse(h, StateVector(3 * psi), 10)
        assert b[0].norm == 1.0
        assert np.allclose(record_moments(a), record_moments(b), atol=1e-13)

    def test_rescaled_records(self):
        rec = rescale_records(run_rvse(OperatorLCU(1, [(0.5, "Z")], hermitian=True), StateVector.basis("0"), 2), 3.0)
        assert [r.norm for r in rec] == pytest.approx([3.0, 1.5, 1.5])

    @pytest.mark.parametrize("seed", range(5))
    def test_oracle_equivalence(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = 2 + seed % 3
        h = random_scaled(rng, n, min(4**n - 1, 12))
        psi = random_state(rng, n)
        rec = run_rvse(h, StateVector(psi), 200)
        m = record_moments(rec)
        direct = moments_direct(h, StateVector(psi), 200)
        assert np.max(np.abs(m - direct.values)) < 1e-9
        assert np.max(np.abs(m - spectral_moments(h, psi, 200))) < 1e-9
        assert np.max(np.abs(m.imag)) < 1e-9
        assert np.max(np.abs(m)) <= 1 + 1e-9
        assert max(abs(r.overlap) for r in rec) <= 1 + 1e-10

    def test_h2_norms_match_unnormalized(self):
        h = builtin_hamiltonian("h2_sto3g")
        h_sc, _ = scale_hamiltonian(h, "auto")
        chi0 = StateVector.basis("1100")
        rec = run_rvse(h_sc, chi0, 50)
        mat = lcu_matrix(h_sc.terms, 4)
        prev, cur = chi0.amplitudes, mat @ chi0.amplitudes
        norms = [1.0, np.linalg.norm(cur)]
        for _ in range(49):
            prev, cur = cur, 2 * mat @ cur - prev
            norms.append(np.linalg.norm(cur))
        assert np.allclose([r.norm for r in rec], norms, atol=1e-10)

    def test_memory_independent_of_k(self):
        n = 12
        terms = [(0.1, "X" + "I" * (n - 1)), (0.2, "Z" * n), (0.15, "I" * (n - 2) + "YY")]
        h = OperatorLCU(n, terms, hermitian=True)
        chi0 = StateVector(random_state(np.random.default_rng(3), n))
        run_rvse(h, chi0, 2)  # warm the sparse-matrix cache
        vec_bytes = chi0.amplitudes.nbytes

        def peak(fn):
            tracemalloc.start()
            fn()
            out = tracemalloc.get_traced_memory()[1]
            tracemalloc.stop()
            return out

        states = [peak(lambda: [None for _ in iter_chebyshev_states(h, chi0, K)]) for K in (20, 400)]
        assert states[1] - states[0] < 0.5 * vec_bytes
        assert states[1] < 6 * vec_bytes
        # run_rvse adds only the O(K) list of small records
        full = [peak(lambda: run_rvse(h, chi0, K)) for K in (20, 400)]
        assert full[1] - full[0] < 0.5 * vec_bytes + 380 * 400


class TestAssemble:
    def test_delta_coefficient(self):
        rec = run_rvse(OperatorLCU(1, [(0.5, "X")], hermitian=True), StateVector.basis("0"), 5)
        assert assemble_expectation(rec, 2.5, lambda k: float(k == 0)) == 2.5

    def test_square_on_eigenstate(self):
        e = -0.42
        op = OperatorLCU(1, [(e, "Z")], hermitian=True)
        rec = run_rvse(op, StateVector.basis("0"), 6)
        c = cheb_coeffs(lambda w: w**2, 6).coefficients
        assert assemble_expectation(rec, 1.0, lambda k: c[k]) == pytest.approx(e**2, abs=1e-12)

    def test_resolvent_against_eigendecomposition(self):
        rng = np.random.default_rng(7)
        h = random_scaled(rng, 2, 6)
        psi = 1.7 * random_state(rng, 2)
        chi0 = StateVector(psi)
        nrm = chi0.norm()
        z = 0.3 + 0.1j
        rec = run_rvse(h, chi0, 3000)
        got = nrm * assemble_expectation(rec, nrm, lambda k: resolvent_coeff(z, k))
        d = exact_diagonalize(h)
        exact = np.sum(d.weights(chi0) / (z - d.eigenvalues))
        assert abs(got - exact) < 1e-4

    def test_moments_direct_low_orders(self):
        rng = np.random.default_rng(4)
        h = random_scaled(rng, 2, 5)
        psi = StateVector(random_state(rng, 2))
        m = moments_direct(h, psi, 1)
        assert m[0] == pytest.approx(1.0)
        energy = np.vdot(psi.amplitudes, apply_lcu(h, psi).amplitudes).real
        assert m[1] == pytest.approx(energy)
        assert m.max_imag < 1e-10
