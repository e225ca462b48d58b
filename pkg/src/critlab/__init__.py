"""Criticality theory toolkit for Schrödinger operators on weighted graphs."""

__version__ = "0.1.0"
