"""Pseudospectral toolkit for 3-D isotropic elastic waves and weighted space-time estimates."""

__version__ = "0.1.0"
