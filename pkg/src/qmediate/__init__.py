"""Causal mediation analysis of variational quantum classifiers."""

__version__ = "0.1.0"
