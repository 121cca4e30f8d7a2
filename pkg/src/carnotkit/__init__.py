"""Computational toolkit for analysis on Carnot groups."""

__version__ = "0.1.0"
