"""Spectral laboratory for the heat equation driven by an irregular path."""

__version__ = "0.1.0"
