"""Dense statevector backend.

Basis index convention: bitstring ``b0 b1 ... b(n-1)`` is index
``sum_j b_j 2^(n-1-j)``, so qubit 0 is the most significant bit and also
the leftmost character of a Pauli word.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, HermiticityError, ParseError, SectorError
from .pauli import OperatorLCU, ScalingParams, check_word, parse_complex, scale_l1, scale_spectral

MAX_DIAG_QUBITS = 14
NORMALIZED_TOL = 1e-10
DEGENERACY_TOL = 1e-9
SECTOR_TOL = 1e-8


class StateVector:
    """Immutable amplitude vector of length ``2**n_qubits``.

    ``source_norm`` keeps the norm the amplitudes had before normalization
    when the state was built with :meth:`normalized` or :func:`parse_state`.
    """

    __slots__ = ("n_qubits", "amplitudes", "is_normalized", "source_norm")

    def __init__(self, amplitudes, normalized: bool = False, source_norm: float | None = None):
        amps = np.array(amplitudes, dtype=complex)
        if amps.ndim != 1:
            raise DimensionError("amplitudes must be one-dimensional")
        n = amps.size.bit_length() - 1
        if amps.size == 0 or 2**n != amps.size:
            raise DimensionError(f"length {amps.size} is not a power of two")
        if not np.all(np.isfinite(amps)):
            raise ValueError("non-finite amplitude")
        amps.flags.writeable = False
        if normalized and abs(np.linalg.norm(amps) - 1.0) >= NORMALIZED_TOL:
            raise ValueError("state flagged normalized but norm differs from 1")
        self.n_qubits = n
        self.amplitudes = amps
        self.is_normalized = normalized
        self.source_norm = source_norm

    @classmethod
    def basis(cls, bits: str | int, n_qubits: int | None = None) -> StateVector:
        if isinstance(bits, str):
            n_qubits = len(bits)
            index = int(bits, 2)
        else:
            index = bits
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(amps, normalized=True, source_norm=1.0)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> StateVector:
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / nrm, normalized=True, source_norm=nrm)

    def __add__(self, other: StateVector) -> StateVector:
        _check_same(self, other)
        return StateVector(self.amplitudes + other.amplitudes)

    def __sub__(self, other: StateVector) -> StateVector:
        _check_same(self, other)
        return StateVector(self.amplitudes - other.amplitudes)

    def __mul__(self, scalar: complex) -> StateVector:
        return StateVector(self.amplitudes * scalar)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"StateVector(n_qubits={self.n_qubits}, norm={self.norm():.6g})"


def _check_same(a: StateVector, b: StateVector) -> None:
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")


def word_masks(word: str) -> tuple[int, int, int]:
    """Return (x_mask, z_mask, number of Y factors) for a Pauli word."""
    n = len(word)
    x = z = 0
    n_y = 0
    for q, ch in enumerate(word):
        bit = 1 << (n - 1 - q)
        if ch in "XY":
            x |= bit
        if ch in "ZY":
            z |= bit
        n_y += ch == "Y"
    return x, z, n_y


def _parity(values: np.ndarray) -> np.ndarray:
    return np.bitwise_count(values).astype(np.int64) & 1


@lru_cache(maxsize=4096)
def _pauli_action(word: str) -> tuple[np.ndarray, np.ndarray]:
    # P|i> = phase(i) |i ^ x>  =>  (P psi)[j] = phase(j ^ x) psi[j ^ x]
    x, z, n_y = word_masks(word)
    idx = np.arange(2 ** len(word), dtype=np.int64)
    src = idx ^ x
    phase = (1j**n_y) * (1 - 2 * _parity(src & z))
    src.flags.writeable = False
    phase.flags.writeable = False
    return src, phase


def apply_pauli(word: str, psi: StateVector) -> StateVector:
    check_word(word)
    if len(word) != psi.n_qubits:
        raise DimensionError(f"word acts on {len(word)} qubits, state has {psi.n_qubits}")
    src, phase = _pauli_action(word)
    return StateVector(phase * psi.amplitudes[src])


def lcu_sparse(op: OperatorLCU) -> sp.csr_matrix:
    """Sparse matrix of an operator, cached on the (immutable) operator."""
    mat = op._cache.get("csr")
    if mat is None:
        dim = 2**op.n_qubits
        rows, cols, data = [], [], []
        idx = np.arange(dim, dtype=np.int64)
        for coeff, word in op.terms:
            src, phase = _pauli_action(word)
            rows.append(idx)
            cols.append(src)
            data.append(coeff * phase)
        if rows:
            mat = sp.csr_matrix(
                (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                shape=(dim, dim),
            )
        else:
            mat = sp.csr_matrix((dim, dim), dtype=complex)
        mat.sum_duplicates()
        op._cache["csr"] = mat
    return mat


def apply_lcu_array(op: OperatorLCU, amps: np.ndarray) -> np.ndarray:
    return lcu_sparse(op) @ amps


def apply_lcu(op: OperatorLCU, psi: StateVector) -> StateVector:
    if op.n_qubits != psi.n_qubits:
        raise DimensionError(f"operator acts on {op.n_qubits} qubits, state has {psi.n_qubits}")
    return StateVector(apply_lcu_array(op, psi.amplitudes))


def inner(bra: StateVector, ket: StateVector) -> complex:
    """<bra|ket>, conjugate-linear in the bra."""
    _check_same(bra, ket)
    return complex(np.vdot(bra.amplitudes, ket.amplitudes))


def occupation_numbers(n_qubits: int) -> np.ndarray:
    """Particle number of every computational basis state."""
    return np.bitwise_count(np.arange(2**n_qubits, dtype=np.int64)).astype(float)


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    vectors: np.ndarray  # columns are eigenvectors
    n_qubits: int

    def __len__(self) -> int:
        return self.eigenvalues.size

    def state(self, i: int) -> StateVector:
        return StateVector(self.vectors[:, i], normalized=True, source_norm=1.0)

    @property
    def eigenvectors(self) -> list[StateVector]:
        return [self.state(i) for i in range(len(self))]

    def weights(self, psi: StateVector) -> np.ndarray:
        """|<E_n|psi>|^2 for every eigenvector."""
        return np.abs(self.vectors.conj().T @ psi.amplitudes) ** 2

    def number_expectations(self) -> np.ndarray:
        occ = occupation_numbers(self.n_qubits)
        return occ @ (np.abs(self.vectors) ** 2)


def exact_diagonalize(op: OperatorLCU, max_qubits: int = MAX_DIAG_QUBITS) -> EigenDecomposition:
    if op.n_qubits > max_qubits:
        raise DimensionError(f"{op.n_qubits} qubits exceeds the diagonalization guard of {max_qubits}")
    if not op.hermitian:
        raise HermiticityError("exact_diagonalize needs a Hamiltonian-flagged operator")
    mat = lcu_sparse(op).toarray()
    evals, evecs = np.linalg.eigh(mat)
    return EigenDecomposition(evals, evecs, op.n_qubits)


SCALE_KINDS = ("auto", "spectral", "l1")


def scale_hamiltonian(
    op: OperatorLCU,
    kind: str = "auto",
    e_min: float | None = None,
    e_max: float | None = None,
    margin: float = 0.01,
    decomp: EigenDecomposition | None = None,
) -> tuple[OperatorLCU, ScalingParams]:
    """Map ``op`` into the Chebyshev window.

    ``auto`` takes the bounds from exact diagonalization; ``spectral`` uses
    the given bounds, diagonalizing only for a missing one; ``l1`` divides
    by the sum of absolute coefficients.
    """
    if kind not in SCALE_KINDS:
        raise ValueError(f"scaling must be one of {SCALE_KINDS}")
    if kind == "l1":
        return scale_l1(op)
    if kind == "auto" or e_min is None or e_max is None:
        if decomp is None:
            decomp = exact_diagonalize(op)
        lo, hi = float(decomp.eigenvalues[0]), float(decomp.eigenvalues[-1])
        if kind == "spectral":
            lo = lo if e_min is None else e_min
            hi = hi if e_max is None else e_max
        if hi == lo:
            # flat spectrum: any window containing it will do
            lo, hi = lo - 1.0, hi + 1.0
        e_min, e_max = lo, hi
    return scale_spectral(op, e_min, e_max, margin)


def _clusters(values: np.ndarray, tol: float) -> list[np.ndarray]:
    out, start = [], 0
    for i in range(1, values.size + 1):
        if i == values.size or values[i] - values[i - 1] > tol:
            out.append(np.arange(start, i))
            start = i
    return out


def sector_basis(decomp: EigenDecomposition, n_particles: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs resolved onto definite particle number ``n_particles``.

    Degenerate levels (within ``1e-9``) are rotated by diagonalizing the
    number operator inside the level, so states of different particle
    number that happen to be degenerate are separated.
    """
    occ = occupation_numbers(decomp.n_qubits)
    energies, vectors = [], []
    for cluster in _clusters(decomp.eigenvalues, DEGENERACY_TOL):
        block = decomp.vectors[:, cluster]
        if cluster.size == 1:
            nums, rot = np.array([occ @ np.abs(block[:, 0]) ** 2]), np.eye(1)
        else:
            nums, rot = np.linalg.eigh(block.conj().T @ (occ[:, None] * block))
        for j in np.flatnonzero(np.abs(nums - n_particles) < SECTOR_TOL):
            energies.append(decomp.eigenvalues[cluster].mean())
            vectors.append(block @ rot[:, j])
    if not energies:
        return np.empty(0), np.empty((2**decomp.n_qubits, 0), dtype=complex)
    return np.array(energies), np.column_stack(vectors)


def ground_state_in_sector(
    decomp: EigenDecomposition, n_particles: int, n_qubits: int | None = None
) -> tuple[float, StateVector]:
    if n_qubits is not None and n_qubits != decomp.n_qubits:
        raise DimensionError("n_qubits does not match the decomposition")
    energies, vectors = sector_basis(decomp, n_particles)
    if energies.size == 0:
        raise SectorError(f"no eigenvector with {n_particles} particles")
    psi = vectors[:, 0]
    return float(energies[0]), StateVector(psi / np.linalg.norm(psi), normalized=True, source_norm=1.0)


def sector_indices(n_qubits: int, n_particles: int) -> np.ndarray:
    return np.flatnonzero(occupation_numbers(n_qubits) == n_particles)


def sector_spectrum(op: OperatorLCU, n_particles: int) -> np.ndarray:
    """Eigenvalues of a number-conserving operator restricted to one sector."""
    idx = sector_indices(op.n_qubits, n_particles)
    if idx.size == 0:
        raise SectorError(f"sector N={n_particles} is empty for {op.n_qubits} qubits")
    block = lcu_sparse(op)[idx][:, idx].toarray()
    return np.linalg.eigvalsh(block)


def is_number_conserving(op: OperatorLCU, tol: float = 1e-12) -> bool:
    mat = lcu_sparse(op).tocoo()
    occ = occupation_numbers(op.n_qubits)
    leak = np.abs(mat.data[occ[mat.row] != occ[mat.col]])
    return not leak.size or float(leak.max()) < tol


_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TERM_RE = re.compile(rf"([+-]?)(\([^()]*\)|{_NUM})?\|([01]+)>")


def parse_state(text: str, n_qubits: int) -> StateVector:
    """Parse ``<amp>|<bits>>`` terms joined by ``+``/``-`` and normalize.

    ``amp`` is a decimal or ``(re,im)`` and may be omitted (meaning 1).
    ``⟩`` is accepted for ``>`` and the Unicode minus for ``-``.
    """
    compact = "".join(text.split()).replace("⟩", ">").replace("−", "-")
    if not compact:
        raise ParseError("empty state specification")
    amps = np.zeros(2**n_qubits, dtype=complex)
    pos = 0
    while pos < len(compact):
        m = _TERM_RE.match(compact, pos)
        if m is None:
            raise ParseError(f"malformed state term at {compact[pos:]!r}")
        sign, amp, bits = m.groups()
        if pos > 0 and not sign:
            raise ParseError(f"missing '+' or '-' before {m.group(0)!r}")
        if len(bits) != n_qubits:
            raise ParseError(f"bitstring {bits!r} has length {len(bits)}, expected {n_qubits}")
        value = parse_complex(amp) if amp else 1.0
        amps[int(bits, 2)] += -value if sign == "-" else value
        pos = m.end()
    nrm = float(np.linalg.norm(amps))
    if nrm == 0.0:
        raise ParseError("state specification sums to the zero vector")
    return StateVector(amps / nrm, normalized=True, source_norm=nrm)
