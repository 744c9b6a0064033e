"""Deepfake detection with artifact attention and caricature generation."""

__version__ = "0.1.0"
