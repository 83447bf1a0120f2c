"""Butterfly-factorized 2D Fourier approximation and its sparse-channel CNN."""

__version__ = "0.1.0"
