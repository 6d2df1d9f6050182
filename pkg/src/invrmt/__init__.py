"""Correlation structure and dynamics of investor inventory variations."""

__version__ = "0.1.0"
