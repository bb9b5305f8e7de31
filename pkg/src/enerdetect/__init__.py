"""Residual-based anomaly detection for building energy consumption."""

__version__ = "0.1.0"
