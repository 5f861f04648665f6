"""Boundary-degenerate parabolic operators: classification, monotone solvers, maximum-principle checks."""

__version__ = "0.1.0"
