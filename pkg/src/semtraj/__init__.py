"""Semantic trajectory analysis of concept-production sequences."""

__version__ = "0.1.0"
