"""Exact desk-scale experiments in metric multiplicative Diophantine approximation."""

__version__ = "0.1.0"
