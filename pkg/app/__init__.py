"""Dilute second-gradient homogenization: library, CLI and JSON service."""

__version__ = "0.1.0"
