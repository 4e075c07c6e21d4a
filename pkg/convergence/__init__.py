"""Numerical diagnostics for unconditional and conditional convergence of series."""

__version__ = "0.1.0"
