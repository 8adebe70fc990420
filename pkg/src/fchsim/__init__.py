"""Pseudo-spectral solver and experiment harness for the Camassa-Holm
alpha model with fractional Laplacian dissipation on periodic boxes."""

__version__ = "0.1.0"
