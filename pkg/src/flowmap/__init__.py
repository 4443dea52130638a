"""Data-driven airspace flow modeling and 3D aircraft proximity maps."""

__version__ = "0.1.0"
