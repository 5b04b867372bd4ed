"""Sparse functional linear regression on Haar wavelet coefficients."""

__version__ = "0.1.0"
