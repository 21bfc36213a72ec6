"""Spectral laboratory for 2D/3D Pauli operators with complex matrix potentials."""

__version__ = "0.1.0"
