"""Grover-driven gradient-free training for small MLPs."""

__version__ = "0.1.0"
