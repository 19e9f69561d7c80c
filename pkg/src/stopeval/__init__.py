"""Stereo obstacle detection with a harness that scores stop decisions."""

__version__ = "0.1.0"
