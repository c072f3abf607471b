"""Conditioning signals for camera-controlled visual-text video generation."""

__version__ = "0.1.0"
