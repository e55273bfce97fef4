"""Adhesive obstacle problem with bending: E_0 minimizers, boundary layers and
numerical checks of the epsilon -> 0 limit."""

__version__ = "0.1.0"
