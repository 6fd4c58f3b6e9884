"""Joint depth super-resolution and uncalibrated photometric stereo."""

__version__ = "0.1.0"
