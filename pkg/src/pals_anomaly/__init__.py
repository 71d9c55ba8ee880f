"""Positron-annihilation lifetime spectroscopy with a single-photon decay channel."""

__version__ = "0.1.0"
