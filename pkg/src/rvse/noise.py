"""Sampling noise for Hadamard-test overlaps and its effect on the recursion.

Three modes are supported:

``exact``
    No noise.
``bernoulli``
    Every overlap entering the cost function and every reference overlap is
    estimated from S simulated +/-1 outcomes, and the noisy normalizing
    constants are fed forward through the recursion.
``surrogate``
    Large-sample Gaussian model. The shift of each normalizing constant,
    eps_k, is the expectation E|phi_mu(1+i) + phi_nu(1+i)| with Gaussian
    phi's whose widths depend on the previous (noisy) constants; reference
    overlaps get an additive phi_k(1+i).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pauli import OperatorLCU
from .rvse import MomentRecord, iter_chebyshev_states
from .statevec import StateVector, _pauli_action

MODES = ("exact", "bernoulli", "surrogate")
PHI_CONVENTIONS = ("paper", "sqrt")
COUPLINGS = ("same", "independent")
PROB_TOL = 1e-12


@dataclass(frozen=True)
class NoiseModel:
    """Shot budget and noise flavour.

    ``phi_convention="paper"`` draws reference-overlap noise as N(0,1)/S;
    ``"sqrt"`` uses N(0,1)/sqrt(S). ``coupling="same"`` puts one draw in
    both the real and imaginary part (phi + i phi); ``"independent"``
    draws them separately.
    """

    shots: int = 1000
    seed: int | None = 0
    mode: str = "exact"
    phi_convention: str = "paper"
    coupling: str = "same"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.phi_convention not in PHI_CONVENTIONS:
            raise ValueError(f"phi_convention must be one of {PHI_CONVENTIONS}")
        if self.coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}")
        if self.mode != "exact" and self.shots < 1:
            raise ValueError("shots must be >= 1")

    @property
    def active(self) -> bool:
        return self.mode != "exact"

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def phi_scale(self) -> float:
        return 1.0 / self.shots if self.phi_convention == "paper" else 1.0 / math.sqrt(self.shots)

    def as_metadata(self) -> dict[str, object]:
        return {
            "noise": self.mode,
            "shots": self.shots,
            "seed": self.seed,
            "phi_convention": self.phi_convention,
            "coupling": self.coupling,
        }


@dataclass(frozen=True)
class NoisyMomentRecord:
    k: int
    norm_noisy: float
    eps: float
    overlap_noisy: complex

    @property
    def moment(self) -> complex:
        return self.norm_noisy * self.overlap_noisy


@dataclass(frozen=True)
class EpsilonSequence:
    sigma_mu: np.ndarray
    sigma_nu: np.ndarray
    eps: np.ndarray

    def __len__(self) -> int:
        return self.eps.size


def _plus_one_probability(x: float) -> float:
    p = (1.0 + x) / 2.0
    if p < -PROB_TOL or p > 1.0 + PROB_TOL:
        raise ValueError(f"overlap component {x} outside [-1, 1]")
    return min(max(p, 0.0), 1.0)


def _mean_outcome(x: float, shots: int, rng: np.random.Generator) -> float:
    # mean of S outcomes in {-1,+1} with Pr(+1) = (1 + x)/2
    return (2.0 * rng.binomial(shots, _plus_one_probability(x)) - shots) / shots


def hadamard_estimate(true_overlap: complex, shots: int, rng: np.random.Generator) -> complex:
    """Simulated Hadamard-test estimate from two batches of S shots (Re, Im)."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    z = complex(true_overlap)
    re = _mean_outcome(z.real, shots, rng)
    im = _mean_outcome(z.imag, shots, rng)
    return complex(re, im)


def hadamard_estimate_batch(true_overlaps, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`hadamard_estimate`; real parts drawn before imaginary parts."""
    z = np.asarray(true_overlaps, dtype=complex)
    p_re = (1.0 + z.real) / 2.0
    p_im = (1.0 + z.imag) / 2.0
    for p in (p_re, p_im):
        if np.any(p < -PROB_TOL) or np.any(p > 1.0 + PROB_TOL):
            raise ValueError("overlap component outside [-1, 1]")
    re = (2.0 * rng.binomial(shots, np.clip(p_re, 0.0, 1.0)) - shots) / shots
    im = (2.0 * rng.binomial(shots, np.clip(p_im, 0.0, 1.0)) - shots) / shots
    return re + 1j * im


def lcu_variance_bound(coeffs, shots_per_term) -> float:
    """Upper bound sum_k |c_k|^2 / S_k on the variance of the LCU estimator."""
    c = np.abs(np.asarray(coeffs, dtype=complex)) ** 2
    s = np.broadcast_to(np.asarray(shots_per_term, dtype=float), c.shape)
    if np.any(s < 1):
        raise ValueError("shots must be >= 1")
    return float(np.sum(c / s))


def sample_lcu_expectation(op: OperatorLCU, psi: StateVector, shots: int, rng: np.random.Generator) -> float:
    """One draw of E = sum_k c_k Pi_k with Pi_k the mean of S Pauli outcomes."""
    total = 0.0
    for coeff, word in op.terms:
        src, phase = _pauli_action(word)
        expval = float(np.vdot(psi.amplitudes, phase * psi.amplitudes[src]).real)
        total += coeff.real * _mean_outcome(expval, shots, rng)
    return total


def expected_abs_shift(sigma_mu: float, sigma_nu: float, coupling: str = "same") -> float:
    """E|phi_mu(1+i) + phi_nu(1+i)| for independent zero-mean Gaussians.

    With one draw per component, |phi (1+i)| = sqrt(2)|phi| and
    E|N(0, s)| = s sqrt(2/pi), giving 2 s / sqrt(pi). With independent real
    and imaginary draws the modulus is Rayleigh with mean s sqrt(pi/2).
    """
    s = math.hypot(sigma_mu, sigma_nu)
    if coupling == "same":
        return 2.0 * s / math.sqrt(math.pi)
    return s * math.sqrt(math.pi / 2.0)


def epsilon_sequence(
    norms_exact: Sequence[float],
    sum_c_sq: float,
    shots: int,
    K: int | None = None,
    coupling: str = "same",
) -> EpsilonSequence:
    """Closed-form eps_0..eps_K of the large-sample noise model.

    sigma_mu,1 = ||chi_0|| sqrt(sum_c_sq / S); for k >= 2
    sigma_mu,k = 2 (||chi_{k-1}|| + eps_{k-1}) sqrt(sum_c_sq / S) and
    sigma_nu,k = (||chi_{k-2}|| + eps_{k-2}) / sqrt(S).
    """
    norms = np.asarray(norms_exact, dtype=float)
    if K is None:
        K = norms.size - 1
    if norms.size != K + 1:
        raise ValueError(f"need {K + 1} norms, got {norms.size}")
    if shots < 1:
        raise ValueError("shots must be >= 1")
    root = math.sqrt(sum_c_sq / shots)
    sig_mu = np.zeros(K + 1)
    sig_nu = np.zeros(K + 1)
    eps = np.zeros(K + 1)
    for k in range(1, K + 1):
        if k == 1:
            sig_mu[k] = norms[0] * root
        else:
            sig_mu[k] = 2.0 * (norms[k - 1] + eps[k - 1]) * root
            sig_nu[k] = (norms[k - 2] + eps[k - 2]) / math.sqrt(shots)
        eps[k] = expected_abs_shift(sig_mu[k], sig_nu[k], coupling)
    return EpsilonSequence(sig_mu, sig_nu, eps)


def noisy_records(
    records: Sequence[MomentRecord],
    model: NoiseModel,
    sum_c_sq: float,
    rng: np.random.Generator | None = None,
    eps: EpsilonSequence | None = None,
) -> list[NoisyMomentRecord]:
    """Surrogate-mode records: norms shifted by eps_k, overlaps by phi_k(1+i)."""
    if model.mode != "surrogate":
        raise ValueError(f"noisy_records needs surrogate mode, got {model.mode!r}")
    if rng is None:
        rng = model.rng()
    if eps is None:
        eps = epsilon_sequence([r.norm for r in records], sum_c_sq, model.shots, coupling=model.coupling)
    scale = model.phi_scale()
    n = len(records)
    if model.coupling == "same":
        phi = scale * rng.standard_normal(n)
        shift = phi * (1 + 1j)
    else:
        shift = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return [
        NoisyMomentRecord(r.k, r.norm + float(eps.eps[i]), float(eps.eps[i]), r.overlap + complex(shift[i]))
        for i, r in enumerate(records)
    ]


def bernoulli_records(
    h_sc: OperatorLCU,
    chi0: StateVector,
    K: int,
    model: NoiseModel,
    rng: np.random.Generator | None = None,
) -> list[NoisyMomentRecord]:
    """One sampled trajectory of the noisy recursion.

    Each cost function F_k is rebuilt from Hadamard-test estimates of
    mu_j = <chi_bar_k|P_j|chi_bar_{k-1}> and nu = <chi_bar_k|chi_bar_{k-2}>
    with the previously *estimated* constants; the reference overlap
    <chi_bar_0|chi_bar_k> is estimated as well. ``eps`` holds the realized
    shift of each constant. Constants are reported in the units of the
    unnormalized chi0, i.e. the k = 0 constant is ||chi0||.
    """
    if model.mode != "bernoulli":
        raise ValueError(f"bernoulli_records needs bernoulli mode, got {model.mode!r}")
    if rng is None:
        rng = model.rng()
    S = model.shots
    coeffs = h_sc.coefficients.real
    actions = [_pauli_action(w) for w in h_sc.words]
    out: list[NoisyMomentRecord] = []
    ref = prev = prev2 = None
    est = [0.0, 0.0]  # estimated constants for k-1, k-2
    scale = chi0.norm()
    for k, amps, nrm in iter_chebyshev_states(h_sc, chi0, K):
        nrm *= scale
        if k == 0:
            ref = amps
            f_hat = nrm
        else:
            mu = np.array([np.vdot(amps, ph * prev[src]) for src, ph in actions])
            energy_term = complex(coeffs @ hadamard_estimate_batch(mu, S, rng))
            if k == 1:
                f_hat = abs(est[0] * energy_term)
            else:
                nu_hat = hadamard_estimate(np.vdot(amps, prev2), S, rng)
                f_hat = abs(2.0 * est[0] * energy_term - est[1] * nu_hat)
        ov_hat = hadamard_estimate(np.vdot(ref, amps), S, rng)
        out.append(NoisyMomentRecord(k, float(f_hat), float(f_hat - nrm), ov_hat))
        est = [f_hat, est[0]]
        prev2, prev = prev, amps
    return out


def error_sum(coeffs, eps, overlaps, chi0_norm: float) -> np.ndarray:
    """Complex sum_k c_k ||chi_0|| eps_k <chi_bar_0|chi_bar_k> per evaluation point.

    ``coeffs`` is a ``(K+1,)`` vector or a ``(n_points, K+1)`` matrix.
    """
    e = np.asarray(eps.eps if isinstance(eps, EpsilonSequence) else eps, dtype=float)
    ov = np.asarray(overlaps, dtype=complex)
    c = np.asarray(coeffs, dtype=complex)
    return chi0_norm * (c * (e * ov)).sum(axis=-1)


def absolute_error_delta(coeff, eps, overlaps_exact, chi0_norm: float):
    """|sum_k c_k ||chi_0|| eps_k <chi_bar_0|chi_bar_k>|.

    ``coeff`` may be a callable order -> coefficient, a coefficient vector,
    or a matrix with one row per evaluation point.
    """
    ov = np.asarray(overlaps_exact, dtype=complex)
    if callable(coeff):
        coeff = np.array([coeff(k) for k in range(ov.size)], dtype=complex)
    out = np.abs(error_sum(coeff, eps, ov, chi0_norm))
    return out if np.ndim(out) else float(out)


def noisy_expectation(noisy: Sequence[NoisyMomentRecord], chi0_norm: float, coeffs) -> np.ndarray:
    """sum_k c_k ||chi_0|| ||chi_k||_noisy nu_hat_k with realized noisy overlaps."""
    m = np.array([r.norm_noisy * r.overlap_noisy for r in noisy])
    out = chi0_norm * (np.asarray(coeffs, dtype=complex) * m).sum(axis=-1)
    return out if np.ndim(out) else complex(out)


def mean_noisy_expectation(records: Sequence[MomentRecord], eps, chi0_norm: float, coeffs) -> np.ndarray:
    """Expectation over phi of the noisy sum: sum_k c_k ||chi_0|| (||chi_k|| + eps_k) nu_k."""
    e = np.asarray(eps.eps if isinstance(eps, EpsilonSequence) else eps, dtype=float)
    m = np.array([(r.norm + e[i]) * r.overlap for i, r in enumerate(records)])
    out = chi0_norm * (np.asarray(coeffs, dtype=complex) * m).sum(axis=-1)
    return out if np.ndim(out) else complex(out)
