"""Twisted-variable Picard solver and estimate lab for the 1D cubic NLS."""

__version__ = "0.1.0"
