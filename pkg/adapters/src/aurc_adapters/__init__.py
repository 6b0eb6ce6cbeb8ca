"""Adapters exporting ML-ecosystem artifacts into the toolkit's file formats."""

__version__ = "0.1.0"
