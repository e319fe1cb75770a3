"""Gradient-variance bounds for black-box variational inference on location-scale families."""

__version__ = "0.1.0"
