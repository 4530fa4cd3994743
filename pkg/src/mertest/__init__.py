"""Test automation and coverage for a small Mercury-like logic language."""

__version__ = "0.1.0"
