"""Optimal quantum-state and entanglement transfer through an XY spin wire."""

__version__ = "0.1.0"
