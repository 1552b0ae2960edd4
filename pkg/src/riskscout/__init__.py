"""Budgeted black-box search for high-risk document configurations."""

__version__ = "0.1.0"
