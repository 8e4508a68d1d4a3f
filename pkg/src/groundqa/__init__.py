"""Grounded question answering with routing, calculators, retrieval and safety gates."""

__version__ = "0.1.0"
