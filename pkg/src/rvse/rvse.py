"""Recursive construction of normalized Chebyshev states.

The variational layer is idealized: the normalized state chi_bar_k is held
exactly, and the optimal cost-function value equals the normalizing
constant ||chi_k||. Everything the quantum device would report is then a
pair (||chi_k||, <chi_bar_0|chi_bar_k>) per order k.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import AnnihilationError, DimensionError
from .pauli import OperatorLCU
from .statevec import StateVector, apply_lcu_array

ANNIHILATION_TOL = 1e-13


@dataclass(frozen=True)
class MomentRecord:
    k: int
    norm: float
    overlap: complex

    @property
    def moment(self) -> complex:
        """<chi_bar_0|T_k(H)|chi_bar_0> = norm * overlap."""
        return self.norm * self.overlap


@dataclass(frozen=True)
class MomentSeries:
    values: np.ndarray
    max_imag: float = 0.0

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, k):
        return self.values[k]


@dataclass(frozen=True)
class ChebStateSequence:
    normalized_states: tuple[StateVector, ...]
    norms: np.ndarray
    chi0_norm: float

    def records(self) -> list[MomentRecord]:
        ref = self.normalized_states[0]
        return [
            MomentRecord(k, float(n), complex(np.vdot(ref.amplitudes, s.amplitudes)))
            for k, (s, n) in enumerate(zip(self.normalized_states, self.norms))
        ]


def _check(h_sc: OperatorLCU, psi: StateVector) -> None:
    if h_sc.n_qubits != psi.n_qubits:
        raise DimensionError(f"operator acts on {h_sc.n_qubits} qubits, state has {psi.n_qubits}")


def _step(h_sc, prev, prev_norm, prev2, prev2_norm, k=None):
    out = apply_lcu_array(h_sc, prev)
    if prev2 is None:
        out *= prev_norm
    else:
        out *= 2.0 * prev_norm
        out -= prev2_norm * prev2
    nrm = float(np.linalg.norm(out))
    if nrm < ANNIHILATION_TOL:
        where = f" {k}" if k is not None else ""
        raise AnnihilationError(f"Chebyshev state{where} has vanishing norm {nrm:.3e}")
    out /= nrm
    return out, nrm


def recursion_step(
    h_sc: OperatorLCU,
    prev: tuple[StateVector, float],
    prev2: tuple[StateVector, float] | None = None,
) -> tuple[StateVector, float]:
    """One step chi_k = 2 ||chi_{k-1}|| H chi_bar_{k-1} - ||chi_{k-2}|| chi_bar_{k-2}.

    Pass ``prev2=None`` for k = 1, where chi_1 = ||chi_0|| H chi_bar_0.
    Returns the normalized state and ||chi_k||.
    """
    state, norm = prev
    _check(h_sc, state)
    if prev2 is None:
        amps, nrm = _step(h_sc, state.amplitudes, norm, None, 0.0, k=1)
    else:
        _check(h_sc, prev2[0])
        amps, nrm = _step(h_sc, state.amplitudes, norm, prev2[0].amplitudes, prev2[1])
    return StateVector(amps, normalized=True, source_norm=nrm), nrm


def iter_chebyshev_states(h_sc: OperatorLCU, chi0: StateVector, K: int) -> Iterator[tuple[int, np.ndarray, float]]:
    """Yield ``(k, chi_bar_k amplitudes, ||chi_k||)`` for k = 0..K.

    chi0 is normalized first, so the k = 0 norm is 1. Only the last two
    states are kept alive; callers must copy a yielded array if they need it
    beyond the next iteration.
    """
    _check(h_sc, chi0)
    if K < 0:
        raise ValueError("K must be non-negative")
    nrm0 = chi0.norm()
    if nrm0 < ANNIHILATION_TOL:
        raise AnnihilationError("initial state has vanishing norm")
    prev2, prev2_norm = None, 0.0
    prev, prev_norm = chi0.amplitudes / nrm0, 1.0
    yield 0, prev, prev_norm
    for k in range(1, K + 1):
        cur, cur_norm = _step(h_sc, prev, prev_norm, prev2, prev2_norm, k)
        yield k, cur, cur_norm
        prev2, prev2_norm = prev, prev_norm
        prev, prev_norm = cur, cur_norm


def run_rvse(h_sc: OperatorLCU, chi0: StateVector, K: int) -> list[MomentRecord]:
    """Normalizing constants and reference overlaps for orders 0..K."""
    records = []
    ref = None
    for k, amps, nrm in iter_chebyshev_states(h_sc, chi0, K):
        if ref is None:
            ref = amps
        records.append(MomentRecord(k, nrm, complex(np.vdot(ref, amps))))
    return records


def chebyshev_states(h_sc: OperatorLCU, chi0: StateVector, K: int) -> ChebStateSequence:
    """Materialize every normalized Chebyshev state (small K only)."""
    states, norms = [], []
    for _, amps, nrm in iter_chebyshev_states(h_sc, chi0, K):
        states.append(StateVector(amps, normalized=True, source_norm=nrm))
        norms.append(nrm)
    return ChebStateSequence(tuple(states), np.array(norms), chi0.norm())


def record_moments(records: Sequence[MomentRecord]) -> np.ndarray:
    return np.array([r.norm * r.overlap for r in records], dtype=complex)


def assemble_expectation(
    records: Sequence[MomentRecord], chi0_norm: float, coeff: Callable[[int], complex]
) -> complex:
    """sum_k coeff(k) ||chi_0|| ||chi_k|| <chi_bar_0|chi_bar_k>.

    This carries one factor of ||chi_0||: the result is
    <chi_0|F(H)|chi_0> / ||chi_0||, and the caller applies the second factor.
    """
    return complex(sum(coeff(r.k) * chi0_norm * r.norm * r.overlap for r in records))


def moments_direct(h_sc: OperatorLCU, chi0: StateVector, K: int) -> MomentSeries:
    """<chi_0|T_k(H)|chi_0> from the plain unnormalized three-term recursion."""
    _check(h_sc, chi0)
    ref = chi0.amplitudes
    prev2, prev = None, ref.copy()
    raw = [np.vdot(ref, prev)]
    for _ in range(K):
        cur = apply_lcu_array(h_sc, prev)
        if prev2 is not None:
            cur = 2.0 * cur - prev2
        raw.append(np.vdot(ref, cur))
        prev2, prev = prev, cur
    raw = np.array(raw)
    return MomentSeries(raw.real.copy(), float(np.max(np.abs(raw.imag))))


def rescale_records(records: Sequence[MomentRecord], chi0_norm: float) -> list[MomentRecord]:
    """Records of the unnormalized chi0: every constant multiplied by ||chi0||."""
    return [MomentRecord(r.k, chi0_norm * r.norm, r.overlap) for r in records]
