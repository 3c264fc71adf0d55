"""Pedestrian detection and safety-helmet verification for fixed-camera video."""

__version__ = "0.1.0"
