"""Contrastive self-supervised learning lab for automatic modulation classification."""

__version__ = "0.1.0"
