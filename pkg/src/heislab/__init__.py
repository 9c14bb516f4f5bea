"""Heisenberg group geometry, contact-form calculus, linking numbers and Hopf invariants."""

__version__ = "0.1.0"
