"""Post-variational quantum neural networks."""

__version__ = "0.1.0"
