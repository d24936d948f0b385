"""Desk-scale quantum machine-learning simulation toolkit."""

__version__ = "0.1.0"
