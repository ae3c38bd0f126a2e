"""Dynamic active weighted average consensus - Python implementation."""

__version__ = "0.1.0"
