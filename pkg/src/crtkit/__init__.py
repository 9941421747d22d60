"""Numerical toolkit for the axis-aligned conical Radon transform."""

__version__ = "0.1.0"
