"""Procedural eye-region synthesis and physically-based rendering of labelled eye images."""

__version__ = "0.1.0"
