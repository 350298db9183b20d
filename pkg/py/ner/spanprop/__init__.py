"""Nested named entity recognition by span proposal and boundary regression."""

__version__ = "0.1.0"
