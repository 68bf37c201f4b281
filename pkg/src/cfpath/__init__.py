"""Counterfactual path planning over rule-based classifiers with causal rules."""

__version__ = "0.1.0"
