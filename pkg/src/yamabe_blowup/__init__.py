"""Reduced-energy toolkit for sign-changing blow-up of the Yamabe equation."""

__version__ = "0.1.0"
