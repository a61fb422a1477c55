"""Top-level package for wolff_toolkit (enables package imports in tests)."""

__version__ = "0.1.0"
