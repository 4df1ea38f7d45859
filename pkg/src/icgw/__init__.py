"""Information Causality game simulation and Gray-Wyner region tools."""

__version__ = "0.1.0"
