"""Mutual-information-maximizing read thresholds for Flash memory."""

__version__ = "0.1.0"
