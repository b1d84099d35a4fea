"""Punctuation and spacing restoration for classical Chinese (hanmun) text."""

__version__ = "0.1.0"
