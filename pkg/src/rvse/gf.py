"""Diagonal one-particle spectral function from Chebyshev moments.

A_ii(E) = -(1/pi) Im[G_att(z+) - G_rem(z-)] with

    G_att(z) = <Phi^i|(z - H)^-1|Phi^i>,  Phi^i = a_i^dag |E0>,  z+ = E + i eta + E0
    G_rem(z) = <Phi_i|(z - H)^-1|Phi_i>,  Phi_i = a_i |E0>,      z- = -(E + i eta) + E0

Both resolvents are expanded on the scaled Hamiltonian: z is mapped by the
same affine map and the result is divided by the scale factor.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chebyshev import resolvent_coeffs
from .errors import AnnihilationError, DimensionError, SectorError
from .noise import NoiseModel, NoisyMomentRecord, bernoulli_records, epsilon_sequence, noisy_records
from .pauli import OperatorLCU, ScalingParams, jw_annihilation, jw_creation
from .rvse import ANNIHILATION_TOL, MomentRecord, rescale_records, run_rvse
from .statevec import (
    DEGENERACY_TOL,
    EigenDecomposition,
    StateVector,
    apply_lcu,
    exact_diagonalize,
    is_number_conserving,
    scale_hamiltonian,
    sector_basis,
    sector_spectrum,
)

CHUNK = 256


@dataclass(frozen=True)
class SpectralConfig:
    """Run parameters; ``grid`` and ``eta`` are in unscaled energy units."""

    orbital: int
    eta: float
    K: int
    grid: np.ndarray
    n_particles: int
    scale: str = "auto"
    e_min: float | None = None
    e_max: float | None = None
    margin: float = 0.01
    workers: int | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("grid must be a non-empty 1-d sequence")
        if grid.size > 1 and np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.K < 0:
            raise ValueError("K must be non-negative")
        if self.orbital < 0 or self.n_particles < 0:
            raise ValueError("orbital and n_particles must be non-negative")
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class SpectralLine:
    label: str
    index: int
    energy: float

    @property
    def pole(self) -> float:
        """Peak position on the E axis: minus the EA or IP value."""
        return -self.energy


@dataclass(frozen=True)
class BranchData:
    """Records for one branch, in units of the unnormalized chi0."""

    chi0_norm: float
    records: list[MomentRecord]
    noisy: list[NoisyMomentRecord] | None = None
    eps: np.ndarray | None = None


@dataclass(frozen=True)
class SpectralResult:
    """A_ii on the grid; ``grid_scaled`` is Re z+ after the affine map."""

    grid: np.ndarray
    a_values: np.ndarray
    a_attach: np.ndarray
    a_remove: np.ndarray
    delta_values: np.ndarray
    exact_reference: np.ndarray
    grid_scaled: np.ndarray = field(default=None)
    ground_energy: float = 0.0
    scaling: ScalingParams | None = None
    table: list[SpectralLine] = field(default_factory=list)
    attach: BranchData | None = None
    remove: BranchData | None = None


def _apply_ladder(op: OperatorLCU, ground: StateVector) -> StateVector:
    if op.n_qubits != ground.n_qubits:
        raise DimensionError(f"operator acts on {op.n_qubits} qubits, state has {ground.n_qubits}")
    out = apply_lcu(op, ground)
    nrm = out.norm()
    if nrm < ANNIHILATION_TOL:
        raise AnnihilationError(f"ladder operator annihilates the state (norm {nrm:.3e})")
    return StateVector(out.amplitudes, source_norm=nrm)


def attachment_state(ground: StateVector, orbital: int) -> StateVector:
    """a_orbital^dag |ground>, left unnormalized."""
    return _apply_ladder(jw_creation(orbital, ground.n_qubits), ground)


def removal_state(ground: StateVector, orbital: int) -> StateVector:
    """a_orbital |ground>, left unnormalized."""
    return _apply_ladder(jw_annihilation(orbital, ground.n_qubits), ground)


def _n_workers(workers: int | None) -> int:
    return max(1, workers if workers else (os.cpu_count() or 1))


def coefficient_contract(z_sc, vectors: np.ndarray, workers: int | None = None) -> np.ndarray:
    """sum_k c_k(z) v_k for every z and every column of ``vectors`` ``(K+1, r)``.

    The coefficient matrix is built in chunks of the z grid so memory stays
    bounded at large K; chunks run on a thread pool.
    """
    z = np.atleast_1d(np.asarray(z_sc, dtype=complex))
    v = np.asarray(vectors, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    K = v.shape[0] - 1
    out = np.empty((z.size, v.shape[1]), dtype=complex)
    starts = range(0, z.size, CHUNK)

    def work(s):
        out[s : s + CHUNK] = resolvent_coeffs(z[s : s + CHUNK], K) @ v

    n = min(_n_workers(workers), len(starts))
    if n == 1:
        for s in starts:
            work(s)
    else:
        with ThreadPoolExecutor(n) as pool:
            list(pool.map(work, starts))
    return out


def resolvent_expectation(h_sc: OperatorLCU, chi0: StateVector, z_sc, records: Sequence[MomentRecord]):
    """<chi_bar_0|(z - H_sc)^-1|chi_bar_0> from normalized-chi0 records.

    Multiply by ||chi0||^2 for the unnormalized expectation.
    """
    if h_sc.n_qubits != chi0.n_qubits:
        raise DimensionError("operator and state sizes differ")
    z = np.asarray(z_sc, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValueError("resolvent_expectation needs Im z > 0")
    m = np.array([r.norm * r.overlap for r in records])
    out = coefficient_contract(z.ravel(), m)[:, 0].reshape(z.shape)
    return out if out.ndim else complex(out)


def exact_resolvent(decomp: EigenDecomposition, chi0: StateVector, z) -> np.ndarray:
    """sum_n |<E_n|chi0>|^2 / (z - E_n), chi0 taken as given (unnormalized)."""
    w = np.abs(decomp.vectors.conj().T @ chi0.amplitudes) ** 2
    z = np.asarray(z, dtype=complex)
    return (w / (z[..., None] - decomp.eigenvalues)).sum(axis=-1)


def ea_ip_table(h: OperatorLCU, n_particles: int) -> list[SpectralLine]:
    """EA_a = E0(N) - E_a(N+1) and IP_i = E_i(N-1) - E0(N) from sector diagonalization."""
    if not is_number_conserving(h):
        raise SectorError("Hamiltonian does not conserve particle number")
    if n_particles < 1 or n_particles + 1 > h.n_qubits:
        raise SectorError(f"sectors N-1, N, N+1 not all present for N={n_particles}, {h.n_qubits} qubits")
    e0 = float(sector_spectrum(h, n_particles)[0])
    plus = sector_spectrum(h, n_particles + 1)
    minus = sector_spectrum(h, n_particles - 1)
    table = [SpectralLine("EA", a, e0 - float(e)) for a, e in enumerate(plus)]
    table += [SpectralLine("IP", i, float(e) - e0) for i, e in enumerate(minus)]
    return table


def sector_ground_state(decomp: EigenDecomposition, n_particles: int) -> tuple[float, StateVector]:
    """Nondegenerate ground state of the N sector."""
    energies, vectors = sector_basis(decomp, n_particles)
    if energies.size == 0:
        raise SectorError(f"no eigenstate with {n_particles} particles")
    if energies.size > 1 and energies[1] - energies[0] < DEGENERACY_TOL:
        raise SectorError(f"ground state of the N={n_particles} sector is degenerate")
    psi = vectors[:, 0]
    return float(energies[0]), StateVector(psi / np.linalg.norm(psi), normalized=True, source_norm=1.0)


def _branch(h_sc, chi, K, model, rng) -> BranchData:
    nrm = chi.norm()
    records = rescale_records(run_rvse(h_sc, chi, K), nrm)
    if model.mode == "surrogate":
        eps = epsilon_sequence([r.norm for r in records], h_sc.sum_sq(), model.shots, coupling=model.coupling)
        return BranchData(nrm, records, noisy_records(records, model, h_sc.sum_sq(), rng, eps), eps.eps)
    if model.mode == "bernoulli":
        noisy = bernoulli_records(h_sc, chi, K, model, rng)
        return BranchData(nrm, records, noisy, np.array([r.eps for r in noisy]))
    return BranchData(nrm, records)


def _branch_values(data: BranchData | None, z_sc, factor, workers):
    """(G, error sum) on the grid, both divided by the scale factor."""
    if data is None:
        zero = np.zeros(z_sc.size, dtype=complex)
        return zero, zero
    if data.noisy is None:
        m = np.array([r.norm * r.overlap for r in data.records])
        g = coefficient_contract(z_sc, m, workers)[:, 0]
        return data.chi0_norm * g / factor, np.zeros_like(g)
    m = np.array([r.moment for r in data.noisy])
    e = np.array([data.eps[r.k] * r.overlap for r in data.records])
    both = coefficient_contract(z_sc, np.column_stack([m, e]), workers)
    return data.chi0_norm * both[:, 0] / factor, data.chi0_norm * both[:, 1] / factor


def spectral_function(h: OperatorLCU, config: SpectralConfig, model: NoiseModel | None = None) -> SpectralResult:
    """Chebyshev A_ii on ``config.grid`` plus the exact Lorentzian reference."""
    model = model or NoiseModel()
    if not is_number_conserving(h):
        raise SectorError("Hamiltonian does not conserve particle number")
    if config.orbital >= h.n_qubits:
        raise DimensionError(f"orbital {config.orbital} out of range for {h.n_qubits} qubits")
    decomp = exact_diagonalize(h)
    h_sc, params = scale_hamiltonian(h, config.scale, config.e_min, config.e_max, config.margin, decomp)
    e0, ground = sector_ground_state(decomp, config.n_particles)
    rng = model.rng()

    grid = config.grid
    z_plus = grid + 1j * config.eta + e0
    z_minus = -(grid + 1j * config.eta) + e0
    out = {}
    for name, builder, z in (("attach", attachment_state, z_plus), ("remove", removal_state, z_minus)):
        try:
            chi = builder(ground, config.orbital)
        except AnnihilationError:
            out[name] = (None, np.zeros(grid.size, dtype=complex), np.zeros(grid.size, dtype=complex), 0j * grid)
            continue
        data = _branch(h_sc, chi, config.K, model, rng)
        g, err = _branch_values(data, params.map_energy(z), params.factor, config.workers)
        out[name] = (data, g, err, exact_resolvent(decomp, chi, z))

    att, g_att, err_att, ex_att = out["attach"]
    rem, g_rem, err_rem, ex_rem = out["remove"]
    a_attach = -g_att.imag / math.pi
    a_remove = g_rem.imag / math.pi
    exact = -(ex_att - ex_rem).imag / math.pi
    delta = np.abs(err_att - err_rem) / math.pi
    try:
        table = ea_ip_table(h, config.n_particles)
    except SectorError:
        table = []
    return SpectralResult(
        grid=grid,
        a_values=a_attach + a_remove,
        a_attach=a_attach,
        a_remove=a_remove,
        delta_values=delta,
        exact_reference=exact,
        grid_scaled=params.map_energy(grid + e0),
        ground_energy=e0,
        scaling=params,
        table=table,
        attach=att,
        remove=rem,
    )


def find_peaks(values: np.ndarray, rel_height: float = 0.05) -> np.ndarray:
    """Indices of interior local maxima above ``rel_height`` times the maximum."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return np.empty(0, dtype=int)
    interior = (v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:]) & (v[1:-1] > rel_height * v.max())
    return np.flatnonzero(interior) + 1
