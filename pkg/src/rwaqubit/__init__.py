"""Exact open-system dynamics of a qubit in a rotating-wave boson bath."""

__version__ = "0.1.0"
