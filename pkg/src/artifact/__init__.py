"""Shrinking points, sector coordinates and skew sawtooth reductions for two-piece continuous affine maps."""

__version__ = "0.1.0"
