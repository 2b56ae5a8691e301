"""Isoperimetric mass of regions in explicit asymptotically flat 3-manifolds."""

__version__ = "0.1.0"
