"""Soft graph clustering for edge-weight prediction with PAC-Bayesian bounds."""

__version__ = "0.1.0"
