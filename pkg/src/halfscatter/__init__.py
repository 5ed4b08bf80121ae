"""Scattering theory for the discrete half-space Laplacian with a periodic boundary potential."""

__version__ = "0.1.0"
