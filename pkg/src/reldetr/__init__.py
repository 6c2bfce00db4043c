"""Top-level package metadata for reldetr."""

__all__ = ["__version__"]

__version__ = "0.1.0"
