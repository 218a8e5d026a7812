"""Wills functional and its functional extensions for convex bodies."""

__version__ = "0.1.0"
