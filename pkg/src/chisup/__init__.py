"""Suprema of weighted chi-square processes."""
__version__ = "0.1.0"
