"""Desk-scale perturbed-training lab: activation/loss hot-swapping, representation
similarity between trained heads, and Lotka-Volterra population dynamics."""

__version__ = "0.1.0"
