"""Desk-scale laboratory for 2D barotropic compressible flow on the torus
with possibly vanishing density: hybrid finite-volume/spectral solver,
functional diagnostics, inequality verification, and flow tracking."""

__version__ = "0.1.0"
