"""Reconstruction-based anomaly detection and risk ranking for cooling data."""

__version__ = "0.1.0"
