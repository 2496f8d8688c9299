"""Unitary designs from measurement-based computation on graph states."""

__version__ = "0.1.0"
