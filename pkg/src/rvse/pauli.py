"""Pauli-word operators, Hamiltonian files, spectral rescaling and Jordan-Wigner.

Words are plain strings over ``IXYZ`` with qubit 0 as the leftmost
character. An :class:`OperatorLCU` is a merged, immutable sum of weighted
words; a Hamiltonian-flagged operator additionally guarantees real
coefficients.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Iterator

import numpy as np

from .errors import ParseError

PAULI_CHARS = frozenset("IXYZ")
MERGE_TOL = 1e-14
REAL_TOL = 1e-12

_COMPLEX_RE = re.compile(r"^\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)$")


def parse_complex(token: str) -> complex:
    """Parse ``1.5``, ``-2e-3`` or ``(re,im)`` into a complex number."""
    token = token.strip()
    m = _COMPLEX_RE.match(token)
    try:
        if m:
            return complex(float(m.group(1)), float(m.group(2)))
        return complex(float(token), 0.0)
    except ValueError as exc:
        raise ParseError(f"malformed coefficient {token!r}") from exc


def check_word(word: str, n_qubits: int | None = None) -> str:
    bad = set(word) - PAULI_CHARS
    if bad:
        raise ParseError(f"invalid Pauli character(s) {''.join(sorted(bad))!r} in {word!r}")
    if not word:
        raise ParseError("empty Pauli word")
    if n_qubits is not None and len(word) != n_qubits:
        raise ParseError(f"word {word!r} has length {len(word)}, expected {n_qubits}")
    return word


class OperatorLCU:
    """Immutable linear combination of Pauli words.

    Terms sharing a word are merged on construction and merged coefficients
    with magnitude below ``1e-14`` are dropped. With ``hermitian=True`` every
    coefficient must be real to within ``1e-12``; the imaginary parts are
    then discarded.
    """

    __slots__ = ("_n", "_terms", "_hermitian", "_cache")

    def __init__(self, n_qubits: int, terms: Iterable[tuple[complex, str]], hermitian: bool = False):
        if n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        merged: dict[str, complex] = {}
        for coeff, word in terms:
            check_word(word, n_qubits)
            merged[word] = merged.get(word, 0j) + complex(coeff)
        kept = []
        for word, coeff in merged.items():
            if abs(coeff) < MERGE_TOL:
                continue
            if hermitian:
                if abs(coeff.imag) >= REAL_TOL:
                    raise ParseError(f"non-real coefficient {coeff} on {word} in Hamiltonian context")
                coeff = complex(coeff.real, 0.0)
            kept.append((coeff, word))
        self._n = n_qubits
        self._terms = tuple(kept)
        self._hermitian = hermitian
        self._cache: dict = {}

    @property
    def n_qubits(self) -> int:
        return self._n

    @property
    def terms(self) -> tuple[tuple[complex, str], ...]:
        return self._terms

    @property
    def hermitian(self) -> bool:
        return self._hermitian

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self._terms], dtype=complex)

    @property
    def words(self) -> list[str]:
        return [w for _, w in self._terms]

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[complex, str]]:
        return iter(self._terms)

    def __repr__(self) -> str:
        body = " + ".join(f"({c:.6g}) {w}" for c, w in self._terms[:6])
        more = " + ..." if len(self._terms) > 6 else ""
        return f"OperatorLCU(n_qubits={self._n}, {body or '0'}{more})"

    def as_dict(self) -> dict[str, complex]:
        return {w: c for c, w in self._terms}

    def identity_coefficient(self) -> complex:
        return self.as_dict().get("I" * self._n, 0j)

    def sum_sq(self) -> float:
        """Sum of squared coefficient magnitudes."""
        return float(sum(abs(c) ** 2 for c, _ in self._terms))

    def scaled(self, factor: complex) -> OperatorLCU:
        herm = self._hermitian and abs(complex(factor).imag) < REAL_TOL
        return OperatorLCU(self._n, ((factor * c, w) for c, w in self._terms), hermitian=herm)

    def adjoint(self) -> OperatorLCU:
        return OperatorLCU(self._n, ((c.conjugate(), w) for c, w in self._terms), self._hermitian)

    def __add__(self, other: OperatorLCU) -> OperatorLCU:
        if not isinstance(other, OperatorLCU):
            return NotImplemented
        if other._n != self._n:
            raise ValueError("qubit counts differ")
        return OperatorLCU(
            self._n, self._terms + other._terms, hermitian=self._hermitian and other._hermitian
        )

    def __mul__(self, factor: complex) -> OperatorLCU:
        return self.scaled(factor)

    __rmul__ = __mul__

    def same_terms(self, other: OperatorLCU, tol: float = 0.0) -> bool:
        """Order-insensitive term comparison."""
        a, b = self.as_dict(), other.as_dict()
        if self._n != other._n or a.keys() != b.keys():
            return False
        return all(abs(a[w] - b[w]) <= tol for w in a)


def parse_hamiltonian(text: str) -> OperatorLCU:
    """Parse the ``<real-coefficient> <pauli-word>`` line format.

    ``#`` starts a comment line and blank lines are ignored. The qubit count
    is taken from the first term.
    """
    terms = []
    n_qubits = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected '<coefficient> <word>', got {raw!r}")
        try:
            coeff = parse_complex(parts[0])
            word = check_word(parts[1].upper(), n_qubits)
        except ParseError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        if abs(coeff.imag) >= REAL_TOL:
            raise ParseError(f"line {lineno}: imaginary coefficient in Hamiltonian")
        n_qubits = len(word)
        terms.append((coeff, word))
    if n_qubits is None:
        raise ParseError("no terms found")
    return OperatorLCU(n_qubits, terms, hermitian=True)


def load_hamiltonian(path) -> OperatorLCU:
    with open(path, encoding="utf-8") as fh:
        return parse_hamiltonian(fh.read())


BUILTIN_PREFIX = "builtin:"
BUILTINS = ("h2_sto3g", "h2_631g")


def builtin_text(name: str) -> str:
    """Text of a bundled Hamiltonian file (``h2_sto3g`` or ``h2_631g``)."""
    if name not in BUILTINS:
        raise ParseError(f"unknown built-in Hamiltonian {name!r}; choose from {BUILTINS}")
    return resources.files("rvse").joinpath("data", f"{name}.txt").read_text(encoding="utf-8")


def builtin_hamiltonian(name: str) -> OperatorLCU:
    return parse_hamiltonian(builtin_text(name))


def serialize_hamiltonian(op: OperatorLCU) -> str:
    if not op.hermitian:
        raise ValueError("only Hamiltonian-flagged operators have a text form")
    lines = [f"{c.real!r} {w}" for c, w in op.terms]
    if not lines:
        # keep the file parseable for a fully cancelled operator
        lines = [f"0.0 {'I' * op.n_qubits}"]
    return "\n".join(lines) + "\n"


def l1_norm(op: OperatorLCU) -> float:
    return float(sum(abs(c) for c, _ in op.terms))


@dataclass(frozen=True)
class ScalingParams:
    """Affine map taking physical energies to the Chebyshev window.

    ``kind == "spectral"`` uses ``(e - h_plus) / h_minus``; ``kind == "l1"``
    uses ``e / lam``.
    """

    kind: str
    h_plus: float = 0.0
    h_minus: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if self.kind == "spectral":
            if not self.h_minus > 0:
                raise ValueError("h_minus must be positive")
        elif self.kind == "l1":
            if not self.lam > 0:
                raise ValueError("lambda must be positive")
        else:
            raise ValueError(f"unknown scaling kind {self.kind!r}")

    @property
    def offset(self) -> float:
        return self.h_plus if self.kind == "spectral" else 0.0

    @property
    def factor(self) -> float:
        """Energy units per scaled unit (H^- or lambda)."""
        return self.h_minus if self.kind == "spectral" else self.lam

    def map_energy(self, e):
        return (e - self.offset) / self.factor

    def unmap_energy(self, e_sc):
        return e_sc * self.factor + self.offset

    def as_metadata(self) -> dict[str, object]:
        if self.kind == "spectral":
            return {"scaling": "spectral", "h_plus": self.h_plus, "h_minus": self.h_minus}
        return {"scaling": "l1", "lambda": self.lam}


def map_energy(params: ScalingParams, e):
    return params.map_energy(e)


def unmap_energy(params: ScalingParams, e_sc):
    return params.unmap_energy(e_sc)


def scale_spectral(
    op: OperatorLCU, e_min: float, e_max: float, margin: float = 0.01
) -> tuple[OperatorLCU, ScalingParams]:
    """Return ``(H - H+)/H-`` with the bounds widened outward by ``margin``.

    Each bound moves by ``margin * (e_max - e_min) / 2``, so any margin > 0
    puts the scaled spectrum strictly inside (-1, 1).
    """
    if not e_max > e_min:
        raise ValueError(f"e_max ({e_max}) must exceed e_min ({e_min})")
    if margin < 0:
        raise ValueError("margin must be non-negative")
    pad = margin * (e_max - e_min) / 2
    lo, hi = e_min - pad, e_max + pad
    params = ScalingParams("spectral", h_plus=(hi + lo) / 2, h_minus=(hi - lo) / 2)
    shifted = list(op.terms) + [(-params.h_plus, "I" * op.n_qubits)]
    out = OperatorLCU(op.n_qubits, ((c / params.h_minus, w) for c, w in shifted), op.hermitian)
    return out, params


def scale_l1(op: OperatorLCU) -> tuple[OperatorLCU, ScalingParams]:
    lam = l1_norm(op)
    if lam == 0:
        raise ValueError("cannot l1-scale the zero operator")
    params = ScalingParams("l1", lam=lam)
    return op.scaled(1.0 / lam), params


def jw_annihilation(j: int, n_qubits: int) -> OperatorLCU:
    """Jordan-Wigner image of a_j: Z...Z (X + iY)/2 with j leading Z's."""
    if not 0 <= j < n_qubits:
        raise IndexError(f"orbital {j} out of range for {n_qubits} qubits")
    pre, post = "Z" * j, "I" * (n_qubits - j - 1)
    return OperatorLCU(n_qubits, [(0.5, pre + "X" + post), (0.5j, pre + "Y" + post)])


def jw_creation(j: int, n_qubits: int) -> OperatorLCU:
    return jw_annihilation(j, n_qubits).adjoint()


def number_operator(n_qubits: int) -> OperatorLCU:
    """Total particle number sum_j (I - Z_j)/2."""
    terms = [(n_qubits / 2, "I" * n_qubits)]
    for j in range(n_qubits):
        terms.append((-0.5, "I" * j + "Z" + "I" * (n_qubits - j - 1)))
    return OperatorLCU(n_qubits, terms, hermitian=True)

