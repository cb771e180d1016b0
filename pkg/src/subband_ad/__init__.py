"""Wavelet-domain attention and anomaly-synthesis toolkit for visual anomaly detection."""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
