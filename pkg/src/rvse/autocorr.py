"""Autocorrelation C(t) = <psi|exp(-i H t)|psi> from one set of Chebyshev moments.

exp(-i x t) = sum_k (2 - delta_k0) (-i)^k J_k(t) T_k(x) on [-1, 1], so every
time point reuses the same moments and only the Bessel weights change.
Times are in units of the scaled Hamiltonian.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .noise import NoiseModel, bernoulli_records, epsilon_sequence, error_sum, noisy_records
from .pauli import OperatorLCU, ScalingParams
from .rvse import rescale_records, run_rvse
from .statevec import StateVector, exact_diagonalize

BOUND_CAP = 2.0
RESCALE_AT = 1e250
SMALL_T = 1e-2
CHUNK = 128


def _miller_start(k_max: int, t_max: float) -> int:
    # comfortably past both the requested order and the turning point k ~ t
    m = max(k_max, math.ceil(t_max))
    n = m + 30 + int(6.0 * math.sqrt(m))
    return n + (n % 2)


def _small_t_series(K: int, t: np.ndarray) -> np.ndarray:
    # J_k(t) = (t/2)^k / k! * sum_m (-(t/2)^2)^m k! / (m! (m+k)!); six terms suffice for t < SMALL_T
    k = np.arange(K + 1)[:, None]
    half = t[None, :] / 2.0
    lead = np.exp(k * np.log(half) - np.array([math.lgamma(j + 1) for j in range(K + 1)])[:, None])
    term = np.ones_like(lead)
    total = term.copy()
    for m in range(1, 6):
        term = term * (-(half**2)) / (m * (m + k))
        total += term
    return lead * total


def bessel_table(K: int, t) -> np.ndarray:
    """J_0..J_K at every t: shape ``(K+1,) + t.shape``.

    Miller downward recurrence J_{k-1} = (2k/t) J_k - J_{k+1} from a
    start far beyond max(K, t), normalized with J_0 + 2 sum_m J_{2m} = 1.
    Columns are rescaled whenever they approach overflow. Very small t,
    where the first downward step would already overflow, uses the power
    series instead.
    """
    if K < 0:
        raise ValueError("order must be non-negative")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be non-negative")
    flat = t_arr.ravel()
    out = np.zeros((K + 1, flat.size))
    zero = flat == 0
    out[0, zero] = 1.0
    small = ~zero & (flat < SMALL_T)
    if np.any(small):
        out[:, small] = _small_t_series(K, flat[small])
    zero = zero | small
    tt = flat[~zero]
    if tt.size:
        n = _miller_start(K, float(tt.max()))
        vals = np.zeros((n + 2, tt.size))
        vals[n] = 1e-30
        even_sum = np.zeros(tt.size)
        for k in range(n, 0, -1):
            vals[k - 1] = (2.0 * k / tt) * vals[k] - vals[k + 1]
            big = np.abs(vals[k - 1]) > RESCALE_AT
            if np.any(big):
                vals[:, big] /= RESCALE_AT
                even_sum[big] /= RESCALE_AT
            if (k - 1) % 2 == 0 and k - 1 > 0:
                even_sum += vals[k - 1]
        norm = vals[0] + 2.0 * even_sum
        out[:, ~zero] = vals[: K + 1] / norm
    return out.reshape((K + 1,) + t_arr.shape)


def bessel_j(k: int, t: float) -> float:
    """First-kind Bessel J_k(t) for integer k >= 0 and t >= 0."""
    if k < 0:
        raise ValueError("order must be non-negative")
    return float(bessel_table(k, float(t))[k])


def expansion_coeffs(t, K: int) -> np.ndarray:
    """(2 - delta_k0) (-i)^k J_k(t), shape ``t.shape + (K+1,)``."""
    jk = np.moveaxis(bessel_table(K, t), 0, -1)
    k = np.arange(K + 1)
    pref = np.where(k == 0, 1.0, 2.0) * (-1j) ** (k % 4)
    return pref * jk


def truncation_bound(K: int, t: float) -> float:
    """4 t^(K+1) / (2^(K+1) (K+1)!), evaluated in logs and capped at 2."""
    if K < 0:
        raise ValueError("K must be non-negative")
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return 0.0
    log_b = math.log(4.0) + (K + 1) * (math.log(t) - math.log(2.0)) - math.lgamma(K + 2)
    return BOUND_CAP if log_b > math.log(BOUND_CAP) else math.exp(log_b)


def choose_k(t_max: float, epsilon: float) -> int:
    """Smallest K with truncation_bound(K, t_max) <= epsilon."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if t_max < 0:
        raise ValueError("t_max must be non-negative")
    if t_max == 0:
        return 0
    K = math.ceil(t_max)
    while truncation_bound(K, t_max) > epsilon:
        K += 1
    while K > 0 and truncation_bound(K - 1, t_max) <= epsilon:
        K -= 1
    return K


def to_scaled_time(params: ScalingParams, t_phys):
    """Scaled time and global phase for a request in physical time.

    exp(-i H t) = exp(-i offset t) exp(-i H_sc (factor t)).
    """
    t = np.asarray(t_phys, dtype=float)
    return t * params.factor, np.exp(-1j * params.offset * t)


@dataclass(frozen=True)
class AutocorrConfig:
    t_grid: np.ndarray
    K: int | None = None
    epsilon_target: float = 1e-8
    workers: int | None = None
    exact: bool = True

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("t_grid must be a non-empty 1-d sequence")
        if np.any(t < 0):
            raise ValueError("t_grid must be non-negative")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("t_grid must be increasing")
        if self.K is not None and self.K < 0:
            raise ValueError("K must be non-negative")
        object.__setattr__(self, "t_grid", t)

    def resolved_k(self) -> int:
        if self.K is not None:
            return self.K
        return choose_k(float(self.t_grid[-1]), self.epsilon_target)


@dataclass(frozen=True)
class AutocorrResult:
    t_grid: np.ndarray
    c_approx: np.ndarray
    c_exact: np.ndarray
    delta: np.ndarray
    bound: np.ndarray
    K: int = 0
    eps: np.ndarray | None = None


def _contract(t: np.ndarray, K: int, vectors: np.ndarray, workers: int | None) -> np.ndarray:
    out = np.empty((t.size, vectors.shape[1]), dtype=complex)
    starts = range(0, t.size, CHUNK)

    def work(s):
        out[s : s + CHUNK] = expansion_coeffs(t[s : s + CHUNK], K) @ vectors

    n = min(max(1, workers or os.cpu_count() or 1), len(starts))
    if n == 1:
        for s in starts:
            work(s)
    else:
        with ThreadPoolExecutor(n) as pool:
            list(pool.map(work, starts))
    return out


def exact_autocorrelation(h_sc: OperatorLCU, psi: StateVector, t) -> np.ndarray:
    """sum_n |<E_n|psi>|^2 exp(-i E_n t) from exact diagonalization."""
    decomp = exact_diagonalize(h_sc)
    w = decomp.weights(psi)
    t = np.asarray(t, dtype=float)
    return np.exp(-1j * t[..., None] * decomp.eigenvalues) @ w


def autocorrelation(
    h_sc: OperatorLCU, psi: StateVector, config: AutocorrConfig, model: NoiseModel | None = None
) -> AutocorrResult:
    """C(t) on ``config.t_grid``. With noise active, ``c_approx`` is the noisy estimate."""
    model = model or NoiseModel()
    t = config.t_grid
    K = config.resolved_k()
    if K < math.ceil(t[-1]):
        warnings.warn(f"K={K} is below max t={t[-1]:g}; the expansion has not converged", RuntimeWarning)
    nrm = psi.norm()
    records = rescale_records(run_rvse(h_sc, psi, K), nrm)
    overlaps = np.array([r.overlap for r in records])
    eps = None
    if model.mode == "surrogate":
        seq = epsilon_sequence([r.norm for r in records], h_sc.sum_sq(), model.shots, coupling=model.coupling)
        noisy = noisy_records(records, model, h_sc.sum_sq(), model.rng(), seq)
        eps = seq.eps
    elif model.mode == "bernoulli":
        noisy = bernoulli_records(h_sc, psi, K, model, model.rng())
        eps = np.array([r.eps for r in noisy])
    if eps is None:
        m = np.array([r.norm * r.overlap for r in records])
        c_approx = nrm * _contract(t, K, m[:, None], config.workers)[:, 0]
        delta = np.zeros(t.size)
    else:
        m = np.array([r.moment for r in noisy])
        both = _contract(t, K, np.column_stack([m, eps * overlaps]), config.workers)
        c_approx = nrm * both[:, 0]
        delta = np.abs(nrm * both[:, 1])
    if config.exact:
        c_exact = exact_autocorrelation(h_sc, psi, t)
    else:
        c_exact = np.full(t.size, np.nan + 0j)
    bound = np.array([truncation_bound(K, float(x)) for x in t])
    return AutocorrResult(t, c_approx, c_exact, delta, bound, K, eps)


def delta_series(t, K: int, eps, overlaps, chi0_norm: float) -> np.ndarray:
    """|sum_k c_k(t) ||chi0|| eps_k <chi_bar_0|chi_bar_k>| on a time grid."""
    return np.abs(error_sum(expansion_coeffs(np.asarray(t, dtype=float), K), eps, overlaps, chi0_norm))
