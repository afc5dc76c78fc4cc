"""Solver and scenario-criticality toolkit for multistage robust
optimization over finite scenario trees with total-variation ambiguity."""

__version__ = "0.1.0"
