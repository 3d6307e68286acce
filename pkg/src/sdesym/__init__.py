"""Symmetries and invariants of Ito stochastic differential equations."""

__version__ = "0.1.0"
