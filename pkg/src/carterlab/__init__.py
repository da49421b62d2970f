"""Verification tools for the conformal scalar sector of Carter-family metrics."""

__version__ = "0.1.0"
