"""Weak values and pointer models for pre/post-selected interferometers."""

__version__ = "0.1.0"
