"""Numerical laboratory for equivariant harmonic maps, random-walk energies,
graph-model random groups and spectral fixed-point criteria."""

__version__ = "0.1.0"
