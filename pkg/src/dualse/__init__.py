"""Dual self-expressive affinity learning with attention-based graph
fusion and normalized-cut spectral clustering."""

__version__ = "0.1.0"
