"""Rare-earth coherence spectroscopy models, fitting and AFC storage simulation."""

__version__ = "0.1.0"
