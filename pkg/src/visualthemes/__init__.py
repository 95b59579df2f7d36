"""Visual theme discovery and retrieval over tagged image corpora."""

__version__ = "0.1.0"
