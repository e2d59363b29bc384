"""Rate-making engine for multi-crop dry-land drought insurance."""

__version__ = "0.1.0"
