"""Explosive-root testing under technology-driven fundamentals."""

__version__ = "0.1.0"
