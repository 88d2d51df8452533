"""Reachability analysis with sparse polynomial zonotopes."""

__version__ = "0.1.0"
