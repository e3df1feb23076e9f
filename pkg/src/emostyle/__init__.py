"""Emotional style transfer for speech, built on numpy and scipy."""

__version__ = "0.1.0"
