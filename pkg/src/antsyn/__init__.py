"""Antonym/synonym distinction from distilled sub-space embeddings."""

__version__ = "0.1.0"
