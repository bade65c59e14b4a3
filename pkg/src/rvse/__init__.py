"""Chebyshev-moment simulation of spectral functions and autocorrelations on a statevector backend."""

__version__ = "0.1.0"
