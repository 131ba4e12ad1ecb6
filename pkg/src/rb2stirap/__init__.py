"""Simulation and fitting of STIRAP transfer and lattice dynamics of Rb2 molecules."""

__version__ = "0.1.0"
