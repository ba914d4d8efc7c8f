"""Randomized selective inference with sampling-based pivots."""

__version__ = "0.1.0"
