"""Constrained block-stacking search with batch Bayesian optimization."""

__version__ = "0.1.0"
