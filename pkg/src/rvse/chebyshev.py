"""Chebyshev polynomials, series, KPM reconstruction and resolvent coefficients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

CLAMP_TOL = 1e-12


def _clamp(omega):
    omega = np.asarray(omega, dtype=float)
    near = np.abs(omega) <= 1.0 + CLAMP_TOL
    return np.where(near, np.clip(omega, -1.0, 1.0), omega)


def t_k(omega, k: int):
    """T_k(omega) by the three-term recurrence; arrays are handled elementwise."""
    if k < 0:
        raise ValueError("order must be non-negative")
    x = _clamp(omega)
    prev, cur = np.ones_like(x), x.copy()
    if k == 0:
        return prev if prev.ndim else float(prev)
    for _ in range(k - 1):
        prev, cur = cur, 2.0 * x * cur - prev
    return cur if cur.ndim else float(cur)


def t_all(omega, K: int) -> np.ndarray:
    """Array of shape ``(K+1,) + omega.shape`` holding T_0..T_K."""
    x = _clamp(omega)
    out = np.empty((K + 1,) + x.shape)
    out[0] = 1.0
    if K >= 1:
        out[1] = x
    for k in range(2, K + 1):
        out[k] = 2.0 * x * out[k - 1] - out[k - 2]
    return out


@dataclass(frozen=True)
class ChebSeries:
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite coefficient")
        object.__setattr__(self, "coefficients", c)

    @property
    def order(self) -> int:
        return self.coefficients.size - 1

    def __call__(self, omega):
        return reconstruct(self, omega)


def cheb_coeffs(f: Callable, K: int, n_quad: int | None = None) -> ChebSeries:
    """Project ``f`` onto T_0..T_K with n-point Gauss-Chebyshev quadrature.

    ``n_quad`` defaults to ``4 (K + 1)`` and must be at least ``2 (K + 1)``.
    """
    if n_quad is None:
        n_quad = 4 * (K + 1)
    if n_quad < 2 * (K + 1):
        raise ValueError(f"n_quad={n_quad} too small for K={K}; need >= {2 * (K + 1)}")
    angles = np.pi * (np.arange(n_quad) + 0.5) / n_quad
    nodes = np.cos(angles)
    try:
        values = np.asarray(f(nodes))
    except (TypeError, ValueError):
        # scalar-only callable
        values = None
    if values is None or values.shape != nodes.shape:
        values = np.array([f(x) for x in nodes])
    k = np.arange(K + 1)
    coeffs = (2.0 / n_quad) * (np.cos(np.outer(k, angles)) @ values)
    coeffs[0] /= 2.0
    return ChebSeries(coeffs)


def reconstruct(series: ChebSeries, omega):
    """Clenshaw evaluation of sum_k c_k T_k(omega)."""
    x = _clamp(omega).astype(complex)
    c = series.coefficients
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for ck in c[:0:-1]:
        b1, b2 = 2.0 * x * b1 - b2 + ck, b1
    out = x * b1 - b2 + c[0]
    return out if out.ndim else complex(out)


def dirichlet_kernel(K: int) -> np.ndarray:
    return np.ones(K + 1)


def kpm_reconstruct(moments, kernel, omega):
    """Density from moments mu_k: [g0 mu0 + 2 sum g_k mu_k T_k] / (pi sqrt(1 - w^2))."""
    mu = np.asarray(moments, dtype=float)
    g = np.asarray(kernel, dtype=float)
    if mu.shape != g.shape:
        raise ValueError("kernel length must match the number of moments")
    w = np.asarray(omega, dtype=float)
    if np.any(np.abs(w) >= 1.0):
        raise ValueError("KPM reconstruction needs |omega| < 1")
    weights = 2.0 * g * mu
    weights[0] = g[0] * mu[0]
    out = reconstruct(ChebSeries(weights), w).real / (np.pi * np.sqrt(1.0 - w**2))
    return out if np.ndim(out) else float(out)


def _decaying_arccos(z: np.ndarray) -> np.ndarray:
    # Principal arccos has Im <= 0 for Im z > 0, giving |exp(-i theta)| < 1.
    # For Im z < 0 the other root -theta is the decaying one.
    theta = np.arccos(z)
    return np.where(theta.imag > 0, -theta, theta)


def _check_off_axis(z: np.ndarray) -> None:
    if np.any(z.imag == 0):
        raise ValueError("resolvent expansion needs Im z != 0")


def resolvent_coeff(z_sc: complex, k: int) -> complex:
    """k-th coefficient of 1/(z - x) = sum_k c_k(z) T_k(x).

    c_k(z) = -i (2 - delta_k0) exp(-i k theta) / sin(theta) with theta the
    arccos of z on the branch where |exp(-i theta)| < 1, so that
    sin(theta) plays the role of sqrt(1 - z^2).
    """
    z = np.asarray(complex(z_sc))
    _check_off_axis(z)
    theta = _decaying_arccos(z)
    pref = 1.0 if k == 0 else 2.0
    return complex(-1j * pref * np.exp(-1j * k * theta) / np.sin(theta))


def resolvent_coeffs(z_sc, K: int) -> np.ndarray:
    """Coefficient matrix of shape ``z.shape + (K+1,)``."""
    z = np.asarray(z_sc, dtype=complex)
    _check_off_axis(z)
    theta = _decaying_arccos(z)[..., None]
    k = np.arange(K + 1)
    pref = np.where(k == 0, 1.0, 2.0)
    return -1j * pref * np.exp(-1j * k * theta) / np.sin(theta)
