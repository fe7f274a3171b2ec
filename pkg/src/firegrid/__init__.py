"""Wildfire-aware robust line switching and dispatch."""

__version__ = "0.1.0"
