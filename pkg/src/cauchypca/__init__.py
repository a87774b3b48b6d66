"""Robust principal components from a Cauchy likelihood."""

__version__ = "0.1.0"
