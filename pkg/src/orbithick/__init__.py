"""Thick-part covers of hyperbolic orbifolds, their nerves and homology bounds."""

__version__ = "0.1.0"
