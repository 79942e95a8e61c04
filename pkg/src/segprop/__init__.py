"""Weak one-click-per-instance labels to dense pseudo labels for 3D scenes."""

__version__ = "0.1.0"
