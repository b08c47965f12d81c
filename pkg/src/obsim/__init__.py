"""Absorptive optical bistability of N atoms in a driven, damped cavity."""

__version__ = "0.1.0"
