"""Gaussian wave packets tunneling through square barriers on a 1D lattice."""

__version__ = "0.1.0"
