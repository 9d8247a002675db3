"""Coupled-channel reflection matrices of periodic dielectric gratings and
Casimir energies between two identical gratings."""

__version__ = "0.1.0"
