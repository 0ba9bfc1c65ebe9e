"""Matching-market optimization: stable matching, inverse optimization, relaxed assignment."""

__version__ = "0.1.0"
