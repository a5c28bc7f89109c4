"""Fragile camera fingerprints: estimation, JPEG modeling, attacks and defenses."""
__version__ = "0.1.0"
