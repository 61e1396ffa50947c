"""Relative entropy coding samplers over seed-addressable Poisson processes."""

__version__ = "0.1.0"
