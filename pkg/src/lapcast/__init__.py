"""Probabilistic rank-position forecasting for lap-based racing series."""

__version__ = "0.1.0"
