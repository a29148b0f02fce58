"""Numerical lab for the mu-family of periodic shallow-water equations."""

__version__ = "0.1.0"
