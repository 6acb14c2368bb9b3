"""System-level simulator of a multi-cell TDD network serving ground users and UAVs."""

__version__ = "0.1.0"
