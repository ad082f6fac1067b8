"""Hydration monitoring from wearable electrodermal activity."""

__version__ = "0.1.0"
