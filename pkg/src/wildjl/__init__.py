"""Exact desk-scale arithmetic for the wild local Jacquet-Langlands correspondence."""

__version__ = "0.1.0"
