"""Finite-model logical geometry: valuations of first-order formulas into
point sets, the Galois closures between formulas and points, LG-types and
knowledge-base isomorphism, all computed exactly over small finite models."""

__version__ = "0.1.0"
