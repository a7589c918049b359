"""Simulate additive martingales of supercritical branching random walks and
compare their fluctuations with alpha-stable limit laws."""

__version__ = "0.1.0"
