"""Behavioral testing for black-box recommender systems."""

__version__ = "0.1.0"
