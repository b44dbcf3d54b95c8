"""Desk-scale deep Gaussian process prior simulation and inference."""

__version__ = "0.1.0"
