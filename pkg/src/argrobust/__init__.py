"""Evaluation and robustness-testing toolkit for argument unit recognition."""

__version__ = "0.1.0"
