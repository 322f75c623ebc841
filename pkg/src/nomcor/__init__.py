"""Proper dependence coefficients for nominal variables."""
__version__ = "0.1.0"
