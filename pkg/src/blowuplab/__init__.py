"""Desk-scale numerical laboratory for self-similar blowup and linear instability."""

__version__ = "0.1.0"
