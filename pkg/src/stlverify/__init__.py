"""Automated verification of linear systems against signal temporal logic."""

__version__ = "0.1.0"
