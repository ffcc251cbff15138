"""Desk-scale simulation and learning toolkit for quadrupeds riding
tilt-controlled personal transporters."""

__version__ = "0.1.0"
